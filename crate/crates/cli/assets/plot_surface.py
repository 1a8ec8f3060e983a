"""Charging efficiency over (kappa_f, gamma_m) from efficiency_surface.csv.

Usage: python plot_surface.py [efficiency_surface.csv] [efficiency_surface.png]
"""
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

src = sys.argv[1] if len(sys.argv) > 1 else "efficiency_surface.csv"
dst = sys.argv[2] if len(sys.argv) > 2 else "efficiency_surface.png"

with open(src) as f:
    rows = list(csv.DictReader(line for line in f if not line.startswith("#")))

# rows are kappa-major, one block of gamma_m values per kappa_f
kappa = np.array([float(r["kappa_f"]) for r in rows])
gamma = np.array([float(r["gamma_m"]) for r in rows])
eta = np.array([1.0 - float(r["eta"]) if r["eta"] else np.nan for r in rows])
ridge = np.array([r["ridge"] == "true" for r in rows])
n_kappa = len(np.unique(kappa))
shape = (n_kappa, len(rows) // n_kappa)

fig, ax = plt.subplots(figsize=(6, 4.5))
# 1 - eta spans many decades near threshold
mesh = ax.pcolormesh(
    kappa.reshape(shape), gamma.reshape(shape), np.log10(eta).reshape(shape), shading="nearest"
)
ax.plot(kappa[ridge], gamma[ridge], "w--", lw=1, label="ridge")
ax.set_xscale("log")
ax.set_yscale("log")
ax.set_xlabel("kappa_f")
ax.set_ylabel("gamma_m")
fig.colorbar(mesh, label="log10(1 - eta)")
ax.legend(loc="upper left", facecolor="0.6")
fig.tight_layout()
fig.savefig(dst, dpi=150)
