"""Problem specifications for Holder-constrained energy minimization."""

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ._validation import check_points, check_positive_int, check_riesz_order
from .measures import DiscreteMeasure

__all__ = ["Objective", "PotentialCap", "ProblemSpec", "InfeasibleProblemError"]


class InfeasibleProblemError(ValueError):
    """Raised when a constraint set is empty or cannot be met."""


class Objective(str, Enum):
    SELF = "self"
    MUTUAL = "mutual"
    P_POTENTIAL = "p_potential"


@dataclass
class PotentialCap:
    """Require ``U^alpha mu_X(x) < M`` at every evaluation point."""

    M: float
    eval_points: np.ndarray

    def __post_init__(self):
        self.M = float(self.M)
        if not self.M > 0:
            raise ValueError("potential cap M must be positive")
        self.eval_points = check_points(self.eval_points, name="eval_points")
        if self.eval_points.shape[0] == 0:
            raise ValueError("potential cap needs at least one evaluation point")


@dataclass
class ProblemSpec:
    """One instance of the discrete minimization problem.

    The admissible set is the discrete Holder ball
    ``{X : X(0) = 0, max |X(t) - X(s)| / |t - s|**gamma <= rho}`` on the
    ``m**k`` grid, optionally intersected with a potential cap and, for
    curves, the endpoint condition ``X(1) = p``.
    """

    objective: Objective
    alpha: float
    gamma: float
    rho: float
    k: int
    n: int
    m: int
    medium: DiscreteMeasure = None
    p_power: float = 1.0
    potential_cap: PotentialCap = None
    endpoint: np.ndarray = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.objective = Objective(self.objective)
        check_positive_int(self.k, "k")
        check_positive_int(self.n, "n")
        check_positive_int(self.m, "m", minimum=2)
        check_riesz_order(self.alpha, self.n)
        upper = min(self.k / (self.n - self.alpha), 1.0)
        if not (0.0 < self.gamma < upper):
            raise InfeasibleProblemError(
                f"gamma must lie in (0, min(k/(n-alpha), 1)) = (0, {upper:.6g}), got {self.gamma}; "
                "otherwise the energy is infinite on the whole Holder ball"
            )
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.objective is not Objective.SELF:
            if self.medium is None:
                raise ValueError(f"objective {self.objective.value} needs a medium measure")
            if self.medium.n != self.n:
                raise ValueError("medium dimension does not match n")
        if self.objective is Objective.P_POTENTIAL and not self.p_power >= 1.0:
            raise ValueError("p_power must be >= 1")
        if self.endpoint is not None:
            if self.k != 1:
                raise ValueError("an endpoint constraint needs k = 1")
            self.endpoint = np.asarray(self.endpoint, dtype=float).ravel()
            if self.endpoint.shape[0] != self.n:
                raise ValueError("endpoint dimension does not match n")
        if self.potential_cap is not None and self.potential_cap.eval_points.shape[1] != self.n:
            raise ValueError("cap evaluation points do not match n")

    @property
    def pinned_indices(self):
        """Flat indices whose values are fixed: the origin and, with an endpoint, ``t = 1``."""
        idx = [0]
        if self.endpoint is not None:
            idx.append(self.m - 1)
        return np.asarray(idx)

    def to_dict(self):
        out = {
            "objective": self.objective.value,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "rho": self.rho,
            "k": self.k,
            "n": self.n,
            "m": self.m,
            "p_power": self.p_power,
        }
        if self.endpoint is not None:
            out["endpoint"] = self.endpoint.tolist()
        if self.potential_cap is not None:
            out["cap_M"] = self.potential_cap.M
        out.update(self.extra)
        return out

    @classmethod
    def from_dict(cls, cfg, base_dir="."):
        """Build from a JSON-style mapping.

        Recognized keys: ``objective, alpha, gamma, rho, k, n, m, medium_csv,
        p_power, cap_M, cap_points_csv, endpoint``. Relative paths resolve
        against ``base_dir``. Without ``cap_points_csv`` the cap is checked on
        the medium atoms.
        """
        base = Path(base_dir)
        known = {"objective", "alpha", "gamma", "rho", "k", "n", "m", "medium_csv", "p_power",
                 "cap_M", "cap_points_csv", "endpoint"}
        missing = [key for key in ("objective", "alpha", "gamma", "rho", "k", "n", "m") if key not in cfg]
        if missing:
            raise ValueError(f"problem config is missing keys: {missing}")
        medium = None
        if cfg.get("medium_csv"):
            medium = DiscreteMeasure.from_csv(base / cfg["medium_csv"])
        cap = None
        if cfg.get("cap_M") is not None:
            if cfg.get("cap_points_csv"):
                pts = np.loadtxt(base / cfg["cap_points_csv"], delimiter=",", skiprows=1, ndmin=2)
                pts = pts[:, : int(cfg["n"])]
            elif medium is not None:
                pts = medium.atoms[medium.weights > 0]
            else:
                raise ValueError("cap_M needs cap_points_csv or a medium")
            cap = PotentialCap(cfg["cap_M"], pts)
        return cls(
            objective=cfg["objective"],
            alpha=float(cfg["alpha"]),
            gamma=float(cfg["gamma"]),
            rho=float(cfg["rho"]),
            k=int(cfg["k"]),
            n=int(cfg["n"]),
            m=int(cfg["m"]),
            medium=medium,
            p_power=float(cfg.get("p_power", 1.0)),
            potential_cap=cap,
            endpoint=cfg.get("endpoint"),
            extra={key: cfg[key] for key in cfg if key not in known},
        )

    @classmethod
    def from_json(cls, path):
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), base_dir=path.parent)
