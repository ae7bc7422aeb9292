"""Monte Carlo path simulation for the one- and two-factor models.

These simulators are the independent stochastic side of the martingale
checks: log-Euler for the price (structurally positive), explicit Euler
with reflection at zero for the variance. Randomness is counter-based
(Philox) with substreams keyed by (seed, path block), so an ensemble is
bit-identical no matter how the work is distributed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import MarketParams, MGParams, SDEParams

PATH_BLOCK = 8192
CSV_ROW_GUARD = 2_000_000


@dataclass(frozen=True)
class PathEnsemble:
    """Simulated paths: prices in ``paths`` (n_paths x (n_steps + 1)),
    variances in ``v_paths`` when the model carries them."""

    paths: np.ndarray
    dt: float
    seed: int
    v_paths: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def n_steps(self) -> int:
        return self.paths.shape[1] - 1

    def terminal(self) -> np.ndarray:
        return self.paths[:, -1]


def _block_normals(seed: int, block_start: int, shape) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=[int(seed), int(block_start)]))
    return gen.standard_normal(shape)


def _check_sizes(s0: float, T: float, dt: float, n_paths: int) -> int:
    if s0 <= 0.0:
        raise ValueError(f"s0 must be positive, got {s0}")
    if T <= 0.0:
        raise ValueError(f"horizon must be positive, got {T}")
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if n_paths < 1:
        raise ValueError(f"n_paths must be positive, got {n_paths}")
    n_steps = max(1, int(round(T / dt)))
    return n_steps


def simulate_gbm(
    sp: SDEParams, s0: float, T: float, dt: float, n_paths: int, seed: int
) -> PathEnsemble:
    """Log-Euler geometric Brownian paths.

    dS = phi S dt + sigma S dW with phi = sp.expected_return; stepped in
    the log so every path stays positive, with increments
    (phi - sigma_sq/2) dt + sigma sqrt(dt) z. The requested dt is
    adjusted to divide the horizon evenly. Zero volatility gives the
    deterministic exponential on every path.
    """
    base = sp.base
    if not isinstance(base, MarketParams):
        raise ValueError("simulate_gbm needs a constant-volatility base")
    n_steps = _check_sizes(s0, T, dt, n_paths)
    dt_eff = T / n_steps
    sig = np.sqrt(base.sigma_sq)
    drift = (sp.expected_return - 0.5 * base.sigma_sq) * dt_eff
    scale = sig * np.sqrt(dt_eff)

    log_paths = np.empty((n_paths, n_steps + 1))
    log_paths[:, 0] = np.log(s0)
    for start in range(0, n_paths, PATH_BLOCK):
        stop = min(start + PATH_BLOCK, n_paths)
        z = _block_normals(seed, start, (stop - start, n_steps))
        np.cumsum(drift + scale * z, axis=1, out=z)
        log_paths[start:stop, 1:] = np.log(s0) + z
    paths = np.exp(log_paths)
    paths[:, 0] = s0  # exp(log(s0)) can be an ulp off the exact start
    return PathEnsemble(paths=paths, dt=dt_eff, seed=int(seed))


def simulate_mg(
    p: MGParams,
    drift: float,
    s0: float,
    v0: float,
    T: float,
    dt: float,
    n_paths: int,
    seed: int,
) -> PathEnsemble:
    """Joint price/variance paths of the two-factor model.

    The price is log-Euler with the running variance; the variance is
    explicit Euler on dV = (lam + mu V) dt + zeta V^alpha dW2, reflected
    at zero. The two normal streams are correlated by the Cholesky
    construction z2 = rho z1 + sqrt(1 - rho^2) z_perp.
    """
    if v0 <= 0.0:
        raise ValueError(f"v0 must be positive, got {v0}")
    n_steps = _check_sizes(s0, T, dt, n_paths)
    dt_eff = T / n_steps
    sq_dt = np.sqrt(dt_eff)
    rho_perp = np.sqrt(1.0 - p.rho**2)

    s_paths = np.empty((n_paths, n_steps + 1))
    v_paths = np.empty((n_paths, n_steps + 1))
    for start in range(0, n_paths, PATH_BLOCK):
        stop = min(start + PATH_BLOCK, n_paths)
        m = stop - start
        z = _block_normals(seed, start, (m, n_steps, 2))
        z1 = z[:, :, 0]
        z2 = p.rho * z1 + rho_perp * z[:, :, 1]
        x = np.full(m, np.log(s0))
        v = np.full(m, float(v0))
        s_paths[start:stop, 0] = s0
        v_paths[start:stop, 0] = v0
        for k in range(n_steps):
            x = x + (drift - 0.5 * v) * dt_eff + np.sqrt(v) * sq_dt * z1[:, k]
            v = np.abs(v + (p.lam + p.mu * v) * dt_eff + p.zeta * v**p.alpha * sq_dt * z2[:, k])
            s_paths[start:stop, k + 1] = np.exp(x)
            v_paths[start:stop, k + 1] = v
    return PathEnsemble(paths=s_paths, dt=dt_eff, seed=int(seed), v_paths=v_paths)


def export_csv(
    ens: PathEnsemble, path, max_rows: int = CSV_ROW_GUARD, force: bool = False
) -> int:
    """Long-format CSV export (path_id, t, S[, V]); returns rows written.

    Refuses ensembles larger than ``max_rows`` rows unless forced, so a
    sweep script cannot silently fill a disk.
    """
    rows = ens.n_paths * (ens.n_steps + 1)
    if rows > max_rows and not force:
        raise ValueError(
            f"export of {rows} rows exceeds the guard of {max_rows}; "
            "pass force=True to override"
        )
    with_v = ens.v_paths is not None
    lines = ["path_id,t,S,V" if with_v else "path_id,t,S"]
    for i in range(ens.n_paths):
        for k in range(ens.n_steps + 1):
            t = k * ens.dt
            if with_v:
                lines.append(f"{i},{t!r},{float(ens.paths[i, k])!r},{float(ens.v_paths[i, k])!r}")
            else:
                lines.append(f"{i},{t!r},{float(ens.paths[i, k])!r}")
    Path(path).write_text("\n".join(lines) + "\n")
    return rows
