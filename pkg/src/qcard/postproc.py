"""Classical heads that turn a measurement probability vector into one number.

All ``eval_*`` functions accept ``x`` with any number of leading batch axes
and read the first few entries of the last axis. ``PostLayer`` bundles a
head with its hyperparameters and trainable scalars and provides the
analytic gradient used in training.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

LAYER_KINDS = (
    "Linear",
    "Rational",
    "RationalLog",
    "Threshold",
    "ThresholdRatio",
    "PlaceValue",
    "PlaceValueNeg",
)

DEFAULT_EPSILON = 1e-6
DEFAULT_THRESHOLD = 0.1
MIN_BASE = 1.0 + 1e-6

_FIXED_WIDTH = {"Linear": 1, "Rational": 2, "RationalLog": 2, "Threshold": 4, "ThresholdRatio": 4}
_SCALAR_NAMES = {
    "Linear": ("s",),
    "Rational": (),
    "RationalLog": (),
    "Threshold": ("s1", "s2"),
    "ThresholdRatio": ("s1", "s2"),
    "PlaceValue": ("b",),
    "PlaceValueNeg": ("b",),
}


def relu(z):
    return np.maximum(z, 0.0)


def eval_linear(x, s):
    return np.asarray(x)[..., 0] * s


def eval_rational(x, epsilon=DEFAULT_EPSILON):
    x = np.asarray(x)
    return (x[..., 0] + epsilon) / (x[..., 1] + epsilon)


def eval_rational_log(x, epsilon=DEFAULT_EPSILON):
    x = np.asarray(x)
    return np.log(x[..., 0] + epsilon) - np.log(x[..., 1] + epsilon)


def _gated(x, d, i):
    return relu(x[..., i] - d) * x[..., i + 1]


def eval_threshold(x, d, s1, s2):
    x = np.asarray(x)
    return _gated(x, d, 0) * s1**2 - _gated(x, d, 2) * s2**2


def eval_threshold_ratio(x, d, s1, s2):
    x = np.asarray(x)
    return (1 + _gated(x, d, 0) * s1**2) / (1 + _gated(x, d, 2) * s2**2)


def eval_place_value(x, b, l):
    x = np.asarray(x)
    return x[..., :l] @ (float(b) ** np.arange(l))


def eval_place_value_neg(x, b, l):
    if l % 2:
        raise ConfigurationError(f"PlaceValueNeg needs an even width, got {l}")
    x = np.asarray(x)
    h = l // 2
    powers = float(b) ** np.arange(h)
    return x[..., :h] @ powers - x[..., h:l] @ powers


@dataclass
class PostLayer:
    """One classical head.

    ``scalars`` holds the kind's trainable values in the order of
    ``scalar_names``. With ``tie_scalars`` the ThresholdRatio denominator
    reuses ``s1`` exactly as the printed formula does, and ``s2`` is ignored.
    """

    kind: str
    width: int | None = None
    scalars: np.ndarray | None = None
    d: float = DEFAULT_THRESHOLD
    epsilon: float = DEFAULT_EPSILON
    tie_scalars: bool = False
    train_scalars: bool = True
    label: str = field(default="")

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigurationError(f"unknown layer kind {self.kind!r}; choose from {', '.join(LAYER_KINDS)}")
        if self.kind in _FIXED_WIDTH:
            fixed = _FIXED_WIDTH[self.kind]
            if self.width not in (None, fixed):
                raise ConfigurationError(f"{self.kind} consumes exactly {fixed} entries, got width {self.width}")
            self.width = fixed
        else:
            self.width = 4 if self.width is None else int(self.width)
            if self.width not in (4, 8):
                raise ConfigurationError(f"{self.kind} width must be 4 or 8, got {self.width}")
        if self.scalars is None:
            init = [2.0] if self.kind.startswith("PlaceValue") else [1.0] * len(self.scalar_names)
            self.scalars = np.array(init, dtype=np.float64)
        self.scalars = np.array(self.scalars, dtype=np.float64).ravel()
        if self.scalars.size != len(self.scalar_names):
            raise ConfigurationError(
                f"{self.kind} takes scalars {self.scalar_names}, got {self.scalars.size} values"
            )
        if self.kind.startswith("PlaceValue") and not self.scalars[0] > 1:
            raise ConfigurationError(f"place-value base must be > 1, got {self.scalars[0]}")
        if not 0.0 <= self.d <= 1.0:
            raise ConfigurationError(f"threshold d must lie in [0, 1], got {self.d}")
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        if not self.label:
            self.label = self.kind + (str(self.width) if self.kind.startswith("PlaceValue") else "")

    @property
    def scalar_names(self) -> tuple[str, ...]:
        return _SCALAR_NAMES[self.kind]

    @property
    def _tied(self) -> bool:
        return self.tie_scalars and self.kind == "ThresholdRatio"

    def _s(self):
        s1, s2 = self.scalars
        return s1, (s1 if self._tied else s2)

    def __call__(self, x):
        k = self.kind
        if k == "Linear":
            return eval_linear(x, self.scalars[0])
        if k == "Rational":
            return eval_rational(x, self.epsilon)
        if k == "RationalLog":
            return eval_rational_log(x, self.epsilon)
        if k == "Threshold":
            return eval_threshold(x, self.d, *self._s())
        if k == "ThresholdRatio":
            return eval_threshold_ratio(x, self.d, *self._s())
        if k == "PlaceValue":
            return eval_place_value(x, self.scalars[0], self.width)
        return eval_place_value_neg(x, self.scalars[0], self.width)

    def grad(self, x):
        """Partial derivatives of the output.

        Returns ``(dv_dx, dv_dscalars)`` with shapes ``(..., width)`` and
        ``(..., n_scalars)``. At a relu kink the subgradient 0 is used.
        """
        x = np.asarray(x, dtype=np.float64)
        lead = x.shape[:-1]
        dx = np.zeros(lead + (self.width,))
        ds = np.zeros(lead + (self.scalars.size,))
        k = self.kind
        if k == "Linear":
            dx[..., 0] = self.scalars[0]
            ds[..., 0] = x[..., 0]
        elif k == "Rational":
            den = x[..., 1] + self.epsilon
            dx[..., 0] = 1 / den
            dx[..., 1] = -(x[..., 0] + self.epsilon) / den**2
        elif k == "RationalLog":
            dx[..., 0] = 1 / (x[..., 0] + self.epsilon)
            dx[..., 1] = -1 / (x[..., 1] + self.epsilon)
        elif k in ("Threshold", "ThresholdRatio"):
            s1, s2 = self._s()
            on0 = (x[..., 0] > self.d).astype(np.float64)
            on2 = (x[..., 2] > self.d).astype(np.float64)
            r0, r2 = relu(x[..., 0] - self.d), relu(x[..., 2] - self.d)
            # numerator term n = r0*x1*s1^2, denominator/subtrahend term m = r2*x3*s2^2
            dn = np.stack([on0 * x[..., 1] * s1**2, r0 * s1**2], axis=-1)
            dm = np.stack([on2 * x[..., 3] * s2**2, r2 * s2**2], axis=-1)
            dn_ds1 = 2 * s1 * r0 * x[..., 1]
            dm_ds2 = 2 * s2 * r2 * x[..., 3]
            if k == "Threshold":
                dv_dn, dv_dm = 1.0, -1.0
            else:
                num = 1 + r0 * x[..., 1] * s1**2
                den = 1 + r2 * x[..., 3] * s2**2
                dv_dn, dv_dm = 1 / den, -num / den**2
            dv_dn = np.asarray(dv_dn)[..., None]
            dv_dm = np.asarray(dv_dm)[..., None]
            dx[..., 0:2] = dv_dn * dn
            dx[..., 2:4] = dv_dm * dm
            if self._tied:
                ds[..., 0] = dv_dn[..., 0] * dn_ds1 + dv_dm[..., 0] * dm_ds2
            else:
                ds[..., 0] = dv_dn[..., 0] * dn_ds1
                ds[..., 1] = dv_dm[..., 0] * dm_ds2
        else:
            b, l = self.scalars[0], self.width
            if k == "PlaceValue":
                signs, powers_idx = np.ones(l), np.arange(l)
            else:
                h = l // 2
                signs = np.concatenate([np.ones(h), -np.ones(h)])
                powers_idx = np.concatenate([np.arange(h), np.arange(h)])
            dx[...] = signs * b**powers_idx
            dpow = powers_idx * b ** np.maximum(powers_idx - 1, 0)
            ds[..., 0] = x[..., :l] @ (signs * dpow)
        return dx, ds

    def project(self) -> None:
        """Clamp trainable scalars back into their valid domain after an update."""
        if self.kind.startswith("PlaceValue"):
            self.scalars[0] = max(self.scalars[0], MIN_BASE)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "width": self.width,
            "scalars": [float(v) for v in self.scalars],
            "d": float(self.d),
            "epsilon": float(self.epsilon),
            "tie_scalars": bool(self.tie_scalars),
            "train_scalars": bool(self.train_scalars),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PostLayer":
        return cls(
            kind=data["kind"],
            width=data["width"],
            scalars=np.array(data["scalars"], dtype=np.float64),
            d=data["d"],
            epsilon=data["epsilon"],
            tie_scalars=data["tie_scalars"],
            train_scalars=data["train_scalars"],
        )
