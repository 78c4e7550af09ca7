"""Figures and the summary table for a finished run directory."""

from __future__ import annotations

import json
import os
from dataclasses import asdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .diagnostics import gronwall_monitor  # noqa: E402
from .persistence import atomic_write, read_diagnostics  # noqa: E402
from .runner import CSV_NAME, STATUS_NAME  # noqa: E402

SUMMARY_NAME = "summary.csv"


def _columns(records):
    return {name: np.array([getattr(r, name) for r in records]) for name in records[0].columns()}


def plot_masses(cols, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(cols["t"], cols["superfluid_mass"], label="superfluid")
    ax.plot(cols["t"], cols["normal_mass"], label="normal")
    ax.plot(cols["t"], cols["total_mass"], "k--", label="total")
    ax.set_xlabel("t")
    ax.set_ylabel("mass")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_energy(cols, path):
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    for name in ("kinetic_energy", "gradient_energy", "potential_energy",
                 "viscous_dissipation", "coupling_dissipation"):
        top.plot(cols["t"], cols[name], label=name.replace("_", " "))
    top.set_ylabel("energy")
    top.legend(fontsize="small")
    resid = np.maximum(cols["energy_residual"], 1e-18)
    bottom.semilogy(cols["t"], resid)
    bottom.set_xlabel("t")
    bottom.set_ylabel("relative energy residual")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_monitors(cols, path, floor=None):
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    top.plot(cols["t"], cols["X"] / cols["X"][0], label="X / X0")
    top.axhline(2.0, color="k", ls=":", label="2")
    top.legend()
    bottom.plot(cols["t"], cols["min_rho"], label="min rho")
    bottom.plot(cols["t"], cols["max_rho"], label="max rho")
    if floor is not None:
        bottom.axhline(floor, color="r", ls=":", label="floor")
    bottom.set_xlabel("t")
    bottom.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def build_report(run_dir, floor=None):
    """Render figures next to the CSV and write ``summary.csv``; returns the summary rows."""
    records = read_diagnostics(os.path.join(run_dir, CSV_NAME))
    status = {}
    status_path = os.path.join(run_dir, STATUS_NAME)
    if os.path.exists(status_path):
        with open(status_path, encoding="utf-8") as fh:
            status = json.load(fh)
    rows = [("outcome", status.get("outcome", "unknown")), ("records", len(records))]
    if records:
        cols = _columns(records)
        gron = gronwall_monitor(records)
        first, last = records[0], records[-1]
        rows += [
            ("t_final", last.t),
            ("total_mass_drift", abs(last.total_mass - first.total_mass) / first.total_mass),
            ("max_energy_residual", float(np.max(cols["energy_residual"]))),
            ("min_rho", float(np.min(cols["min_rho"]))),
            ("max_rho", float(np.max(cols["max_rho"]))),
        ]
        rows += [(f"gronwall_{k}", v) for k, v in asdict(gron).items()]
        plot_masses(cols, os.path.join(run_dir, "masses.png"))
        plot_energy(cols, os.path.join(run_dir, "energy.png"))
        plot_monitors(cols, os.path.join(run_dir, "monitors.png"), floor)
    lines = ["quantity,value"]
    for key, value in rows:
        text = f"{value:.17g}" if isinstance(value, float) else str(value)
        lines.append(f"{key},{text}")
    atomic_write(os.path.join(run_dir, SUMMARY_NAME), "\n".join(lines) + "\n")
    return rows
