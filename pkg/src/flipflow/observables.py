"""Named observables on phase space.

An observable evaluates on rows ``x = (q_1..q_N, p_1..p_N)``. Quadratic
ones also carry their matrix ``M`` with ``f(x) = x^T M x``, which lets
time averages use exact segment integrals instead of quadrature.

Names (indices are 1-based)::

    H                      total energy
    r{k}_sq                squared action radius of mode k
    q{i}_sq, p{i}_sq       squared coordinate / momentum
    q{i}_q{j}, p{i}_p{j}, q{i}_p{j}
                           cross products
    q{i}, p{i}             coordinates (linear, quadrature path)
    q{i}_4, p{i}_4         fourth powers (quadrature path)
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError

NAME_PATTERNS = (
    "H",
    "r{k}_sq",
    "q{i}_sq",
    "p{i}_sq",
    "q{i}_q{j}",
    "p{i}_p{j}",
    "q{i}_p{j}",
    "q{i}",
    "p{i}",
    "q{i}_4",
    "p{i}_4",
)

_RE_RADIUS = re.compile(r"^r(\d+)_sq$")
_RE_POWER = re.compile(r"^([qp])(\d+)(?:_(sq|4))?$")
_RE_CROSS = re.compile(r"^([qp])(\d+)_([qp])(\d+)$")


@dataclass(frozen=True, eq=False)
class Observable:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    form: Optional[np.ndarray] = None

    @property
    def is_quadratic(self):
        return self.form is not None

    def __call__(self, x):
        """Evaluate on a State, a single 2N vector or an (m, 2N) array."""
        if hasattr(x, "as_vector"):
            x = x.as_vector()
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(self.fn(x[None, :])[0])
        return self.fn(x)

    def modal_form(self, spec):
        """The form in modal (q~, p~) coordinates: B^T M B with B = diag(modes, modes)."""
        if self.form is None:
            raise ValueError(f"observable {self.name!r} is not quadratic")
        b = _modal_basis(spec)
        return b.T @ self.form @ b


def _modal_basis(spec):
    n = spec.n
    b = np.zeros((2 * n, 2 * n))
    b[:n, :n] = spec.modes
    b[n:, n:] = spec.modes
    return b


def _quadratic(name, m):
    m = 0.5 * (m + m.T)
    m.setflags(write=False)

    def fn(x):
        return np.einsum("ij,jk,ik->i", x, m, x)

    return Observable(name, fn, m)


def _index(spec, name, raw):
    k = int(raw)
    if not 1 <= k <= spec.n:
        raise ConfigError(
            f"observable {name!r}: index {k} outside 1..{spec.n}; valid names: {describe_names(spec)}"
        )
    return k - 1


def _slot(spec, letter, idx):
    return idx if letter == "q" else spec.n + idx


def describe_names(spec=None):
    bound = "N" if spec is None else str(spec.n)
    return ", ".join(NAME_PATTERNS) + f" (indices 1..{bound})"


def resolve(name, spec):
    """Look up the observable called ``name`` for ``spec``.

    Raises:
        ConfigError: unknown name or index out of range; the message lists
            the valid names.
    """
    n2 = 2 * spec.n
    if name == "H":
        m = np.zeros((n2, n2))
        m[: spec.n, : spec.n] = 0.5 * spec.v_matrix
        m[spec.n :, spec.n :] = 0.5 * np.eye(spec.n)
        return _quadratic(name, m)

    hit = _RE_RADIUS.match(name)
    if hit:
        k = _index(spec, name, hit.group(1))
        modal = np.zeros((n2, n2))
        modal[k, k] = spec.omega_sq[k]
        modal[spec.n + k, spec.n + k] = 1.0
        b = _modal_basis(spec)
        return _quadratic(name, b @ modal @ b.T)

    hit = _RE_POWER.match(name)
    if hit:
        letter, raw, power = hit.groups()
        col = _slot(spec, letter, _index(spec, name, raw))
        if power == "sq":
            m = np.zeros((n2, n2))
            m[col, col] = 1.0
            return _quadratic(name, m)
        if power == "4":
            return Observable(name, lambda x: x[:, col] ** 4)
        return Observable(name, lambda x: x[:, col].copy())

    hit = _RE_CROSS.match(name)
    if hit:
        la, ra, lb, rb = hit.groups()
        if (la, lb) in (("q", "q"), ("p", "p"), ("q", "p")):
            a = _slot(spec, la, _index(spec, name, ra))
            b = _slot(spec, lb, _index(spec, name, rb))
            m = np.zeros((n2, n2))
            m[a, b] += 0.5
            m[b, a] += 0.5
            return _quadratic(name, m)

    raise ConfigError(f"unknown observable {name!r}; valid names: {describe_names(spec)}")


def resolve_all(names, spec):
    return [resolve(name, spec) for name in names]
