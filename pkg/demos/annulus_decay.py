"""Homogeneous annulus run: sup norm against the exponential envelope.

Run with ``python3 demos/annulus_decay.py``.
"""
from forch.experiments import decay_experiment


def main():
    out = decay_experiment(R=2.0, nodes=200, dt=2e-3, cycles=3.0)
    summary = out["summary"]
    for key in ("eta1", "fitted_rate", "rate_ok", "passed"):
        print(f"{key:>12}: {summary[key]}")
    print(f"{'contraction':>12}: {summary['contraction']}")


if __name__ == "__main__":
    main()
