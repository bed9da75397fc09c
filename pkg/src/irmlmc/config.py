"""Numerical tolerances and decision thresholds shared by every module."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    # grid construction: a recursion point within grid_snap * step of T is taken as T
    grid_snap: float = 1e-9
    # Z is singular when |det Z| < singular_det * ||Z||^d
    singular_det: float = 1e-12
    # asymptotic critical values at the 1% level
    ks_c_alpha: float = 1.628
    jb_critical: float = 9.21
    # verdict thresholds used by `verify`, `bs` and the acceptance suite
    psi_sup_max: float = 0.05
    cross_qv_rel: float = 0.10
    error_var_rel: float = 0.10
    ks_max: float = 0.05
    clt_var_rel: float = 0.25
    hedge_ratio_lo: float = 0.85
    hedge_ratio_hi: float = 1.15
    mean_z: float = 3.0

    def override(self, **kwargs) -> "Tolerances":
        known = {f.name for f in fields(self)}
        bad = sorted(set(kwargs) - known)
        if bad:
            raise ValueError(f"unknown tolerance field(s): {', '.join(bad)}")
        return replace(self, **{k: float(v) for k, v in kwargs.items()})

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


DEFAULT = Tolerances()
