#!/usr/bin/env python3
"""Fits the benchmark networks and writes fixtures/*.json plus manifest.json.

Systems:
  rayleigh-duffing      x1' = x2, x2' = mu (1 - x2^2) x2 - x1 - x1^3, mu = 0.2,
                        one RK4 step of dt = 0.1, ReLU 2-16-16-2
  cartpole-feedforward  frictionless cart-pole (cart 0.25 kg, pole 0.1 kg,
                        length 0.4 m, dt = 0.05) under saturated LQR,
                        ReLU 4-100-100-4 for the closed loop
  cartpole-residual     same plant; tanh 5-50-4 residual on top of the
                        discrete Jacobians (A, B) at the origin and a ReLU
                        4-100-1 policy imitating the saturated LQR

Usage: generate_fixtures.py [--out DIR] [--seed N] [--epochs N]
"""

import argparse
import json
import pathlib

import numpy as np
import scipy.linalg
import torch

G = 9.81
M_CART, M_POLE, LENGTH = 0.25, 0.1, 0.4
F_MAX = 10.0


def rk4(f, x, dt):
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def duffing_rhs(x, mu=0.2):
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([x2, mu * (1 - x2**2) * x2 - x1 - x1**3], axis=-1)


def cartpole_rhs(x, force):
    """State (position, velocity, angle, angular rate); angle 0 is upright."""
    v, th, om = x[..., 1], x[..., 2], x[..., 3]
    total = M_CART + M_POLE
    s, c = np.sin(th), np.cos(th)
    tmp = (force + M_POLE * LENGTH * om**2 * s) / total
    th_acc = (G * s - c * tmp) / (LENGTH * (4.0 / 3.0 - M_POLE * c**2 / total))
    acc = tmp - M_POLE * LENGTH * th_acc * c / total
    return np.stack([v, acc, om, th_acc], axis=-1)


def cartpole_step(x, u, dt=0.05):
    return rk4(lambda z: cartpole_rhs(z, u), x, dt)


def jacobians(dt=0.05, eps=1e-6):
    a = np.zeros((4, 4))
    b = np.zeros((4, 1))
    zero = np.zeros(4)
    for j in range(4):
        e = np.zeros(4)
        e[j] = eps
        a[:, j] = (cartpole_step(zero + e, 0.0, dt) - cartpole_step(zero - e, 0.0, dt)) / (2 * eps)
    b[:, 0] = (cartpole_step(zero, eps, dt) - cartpole_step(zero, -eps, dt)) / (2 * eps)
    return a, b


def lqr_gain(a, b):
    q = np.diag([1.0, 1.0, 10.0, 1.0])
    r = np.array([[0.1]])
    p = scipy.linalg.solve_discrete_are(a, b, q, r)
    return np.linalg.solve(r + b.T @ p @ b, b.T @ p @ a)


def policy(k, x):
    return np.clip(-(x @ k.T)[..., 0], -F_MAX, F_MAX)


def mlp(sizes, act):
    layers = []
    for i in range(len(sizes) - 1):
        layers.append(torch.nn.Linear(sizes[i], sizes[i + 1]))
        if i < len(sizes) - 2:
            layers.append(act())
    return torch.nn.Sequential(*layers).double()


def fit(net, x, y, epochs, seed):
    """Full-batch Adam on standardized data; returns held-out relative RMS."""
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(x))
    split = int(0.9 * len(x))
    tr, te = idx[:split], idx[split:]
    mx, sx = x[tr].mean(0), x[tr].std(0) + 1e-12
    my, sy = y[tr].mean(0), y[tr].std(0) + 1e-12
    xt = torch.tensor((x - mx) / sx)
    yt = torch.tensor((y - my) / sy)
    opt = torch.optim.Adam(net.parameters(), lr=3e-3)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, epochs)
    for _ in range(epochs):
        opt.zero_grad()
        loss = torch.mean((net(xt[tr]) - yt[tr]) ** 2)
        loss.backward()
        opt.step()
        sched.step()
    # Fold the standardization into the first and last affine layers.
    linear = [m for m in net if isinstance(m, torch.nn.Linear)]
    with torch.no_grad():
        first, last = linear[0], linear[-1]
        w = first.weight / torch.tensor(sx)
        first.bias -= (w * torch.tensor(mx)).sum(1)
        first.weight.copy_(w)
        last.weight.mul_(torch.tensor(sy)[:, None])
        last.bias.mul_(torch.tensor(sy)).add_(torch.tensor(my))
        pred = net(torch.tensor(x[te])).numpy()
    err = np.sqrt(np.mean((pred - y[te]) ** 2, axis=0))
    scale = np.sqrt(np.mean((y[te] - y[te].mean(0)) ** 2, axis=0)) + 1e-12
    return float(np.max(err / scale))


def export(net, act_name, n_w=0):
    """Graph JSON for a chain Input -> (Affine -> act)* -> Affine."""
    linear = [m for m in net if isinstance(m, torch.nn.Linear)]
    n_in = linear[0].in_features
    n_x = n_in - n_w
    nodes = [{"id": 0, "op": "input", "dim": n_x, "inputs": []}]
    inputs = [0]
    if n_w:
        nodes.append({"id": 1, "op": "input", "dim": n_w, "inputs": []})
        inputs.append(1)
    prev = list(inputs)
    for i, lin in enumerate(linear):
        nid = len(nodes)
        w = lin.weight.detach().numpy()
        nodes.append({"id": nid, "op": "affine", "dim": int(w.shape[0]), "inputs": prev,
                      "W": w.tolist(), "b": lin.bias.detach().numpy().tolist()})
        prev = [nid]
        if i < len(linear) - 1:
            nodes.append({"id": nid + 1, "op": act_name, "dim": int(w.shape[0]), "inputs": [nid]})
            prev = [nid + 1]
    return {"inputs": inputs, "output": prev[0], "state_dim": n_x, "disturbance_dim": n_w, "nodes": nodes}


def forward(net, x):
    with torch.no_grad():
        return net(torch.tensor(x)).numpy()


def duffing(seed, epochs):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2.0, 2.0, size=(20000, 2))
    y = rk4(duffing_rhs, x, 0.1)
    net = mlp([2, 16, 16, 2], torch.nn.ReLU)
    return net, fit(net, x, y, epochs, seed)


def cartpole_feedforward(seed, epochs, k):
    rng = np.random.default_rng(seed + 1)
    # Closed-loop rollouts from around the initial set, plus uniform cover.
    starts = rng.uniform([1.8, 0.8, -0.25, -1.2], [2.4, 1.4, -0.03, -0.6], size=(400, 4))
    states = [starts]
    x = starts
    for _ in range(40):
        x = cartpole_step(x, policy(k, x))
        states.append(x)
    traj = np.concatenate(states)
    lo, hi = traj.min(0), traj.max(0)
    pad = 0.2 * (hi - lo)
    cover = rng.uniform(lo - pad, hi + pad, size=(20000, 4))
    xs = np.concatenate([traj, cover])
    ys = cartpole_step(xs, policy(k, xs))
    net = mlp([4, 100, 100, 4], torch.nn.ReLU)
    return net, fit(net, xs, ys, epochs, seed + 1)


def cartpole_residual(seed, epochs, k, a, b):
    rng = np.random.default_rng(seed + 2)
    lo = np.array([-0.5, -1.5, -0.3, -1.5])
    hi = np.array([0.8, 1.0, 0.6, 1.5])
    xs = rng.uniform(lo, hi, size=(20000, 4))
    us = rng.uniform(-F_MAX, F_MAX, size=20000)
    target = cartpole_step(xs, us) - xs @ a.T - us[:, None] * b.T
    res = mlp([5, 50, 4], torch.nn.Tanh)
    res_err = fit(res, np.column_stack([xs, us]), target, epochs, seed + 2)
    pol = mlp([4, 100, 1], torch.nn.ReLU)
    pol_err = fit(pol, xs, policy(k, xs)[:, None], epochs, seed + 3)
    return res, pol, res_err, pol_err


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parents[2] / "fixtures"))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--epochs", type=int, default=4000)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    torch.set_num_threads(1)

    a, b = jacobians()
    k = lqr_gain(a, b)
    report = {}

    net, err = duffing(args.seed, args.epochs)
    report["rayleigh-duffing"] = err
    (out / "rayleigh_duffing.json").write_text(json.dumps(export(net, "relu")))

    net, err = cartpole_feedforward(args.seed, args.epochs, k)
    report["cartpole-feedforward"] = err
    (out / "cartpole_feedforward.json").write_text(json.dumps(export(net, "relu")))

    res, pol, res_err, pol_err = cartpole_residual(args.seed, args.epochs, k, a, b)
    report["cartpole-residual/residual"] = res_err
    report["cartpole-residual/policy"] = pol_err
    # Reference rollouts of the assembled loop for cross-checking.
    rng = np.random.default_rng(args.seed + 4)
    x0 = rng.uniform([0.0, -0.2, 0.262, -0.15], [0.3, -0.1, 0.312, -0.05], size=(16, 4))
    ws = rng.uniform(-0.05, 0.05, size=(3, 16, 4))
    rollout = [x0]
    x = x0
    for t in range(3):
        u = forward(pol, x)
        x = x @ a.T + u @ b.T + forward(res, np.column_stack([x, u])) + ws[t]
        rollout.append(x)
    (out / "cartpole_residual.json").write_text(json.dumps({
        "policy": export(pol, "relu"),
        "residual": export(res, "tanh"),
        "A": a.tolist(),
        "B": b.tolist(),
        "rollout": {"states": np.stack(rollout, 1).tolist(), "disturbances": np.transpose(ws, (1, 0, 2)).tolist()},
    }))

    manifest = {"scenarios": [
        {"name": "rayleigh-duffing", "network": "rayleigh_duffing.json",
         "x0": {"lo": [0.9, 0.4], "hi": [1.1, 0.6]}, "horizon": 6, "template": "box",
         "note": "RK4 dt=0.1, mu=0.2, ReLU 2-16-16-2, no disturbance", "kind": "network"},
        {"name": "cartpole-feedforward", "network": "cartpole_feedforward.json",
         "x0": {"lo": [2.0, 1.0, -0.174, -1.0], "hi": [2.2, 1.2, -0.104, -0.8]}, "horizon": 8, "template": "box",
         "note": "closed loop under saturated LQR, dt=0.05, ReLU 4-100-100-4", "kind": "network"},
        {"name": "cartpole-residual", "network": "cartpole_residual.json",
         "x0": {"lo": [0.0, -0.2, 0.262, -0.15], "hi": [0.3, -0.1, 0.312, -0.05]},
         "w": {"lo": [-0.05] * 4, "hi": [0.05] * 4}, "horizon": 3, "template": "box",
         "note": "x+ = A x + B pi(x) + f(x, pi(x)) + w; tanh 5-50-4 residual, ReLU 4-100-1 policy",
         "kind": "residual"},
    ], "fit_relative_rms": report}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
