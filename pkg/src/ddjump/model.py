"""Process definitions: config parsing, rate/drift/Jacobian evaluation.

A model is a density-dependent jump process on the integer lattice: from
state X it jumps to X + J at rate N * r_J(X/N) for each jump J in a finite
set.  The scaled process X/N then tracks the drift ODE dy/dt = sum_J J r_J(y).

Config format (line oriented; ``#`` starts a comment; blank lines ignored)::

    [dimension]
    2
    [params]
    alpha = 2.0
    beta = 1.0
    gamma = 1.0
    [jumps]
    -1  1 : alpha * x1 * x2
     1  0 : beta
     0 -1 : gamma * x2
    [domain]            # optional; omitted => nonnegative orthant
    x1 >= 0
    x2 >= 0

Domain lines are axis-aligned bounds ``x<i> >= c`` / ``x<i> <= c``.  Any
other non-blank line is rejected with its line number.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import (
    ConfigError,
    DimensionMismatchError,
    DomainError,
    RateError,
)


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box; unbounded sides are +/-inf."""

    lower: tuple
    upper: tuple

    @staticmethod
    def nonnegative_orthant(d):
        return Domain(lower=(0.0,) * d, upper=(math.inf,) * d)

    @staticmethod
    def unbounded(d):
        return Domain(lower=(-math.inf,) * d, upper=(math.inf,) * d)

    def contains(self, y):
        y = np.asarray(y, dtype=float)
        return bool(np.all(y >= self.lower) and np.all(y <= self.upper))

    def m_distance_to_boundary(self, c, M):
        """M-norm distance from ``c`` to the nearest finite face.

        The M-distance from a point to the hyperplane x_i = b equals
        |c_i - b| / sqrt((M^-1)_ii).
        """
        c = np.asarray(c, dtype=float)
        Minv = np.linalg.inv(M)
        dist = math.inf
        for i in range(len(c)):
            scale = math.sqrt(Minv[i, i])
            if math.isfinite(self.lower[i]):
                dist = min(dist, (c[i] - self.lower[i]) / scale)
            if math.isfinite(self.upper[i]):
                dist = min(dist, (self.upper[i] - c[i]) / scale)
        return dist


@dataclass(frozen=True)
class Model:
    """Immutable process definition; all operations on it are pure."""

    d: int
    jumps: tuple  # tuple of d-tuples of ints
    rate_exprs: tuple  # parallel tuple of expression trees
    params: dict
    domain: Domain
    source: str = field(default="", repr=False, compare=False)

    def __post_init__(self):
        if self.d < 1:
            raise DimensionMismatchError("dimension must be >= 1")
        if not self.jumps:
            raise ConfigError("a model needs at least one jump")
        seen = set()
        for J in self.jumps:
            if len(J) != self.d:
                raise DimensionMismatchError(
                    f"jump {J} has dimension {len(J)}, expected {self.d}"
                )
            if all(v == 0 for v in J):
                raise ConfigError(f"jump {J} is the zero vector")
            if J in seen:
                raise ConfigError(f"duplicate jump {J}")
            seen.add(J)

    @property
    def jump_array(self):
        return np.array(self.jumps, dtype=np.int64)

    def __getstate__(self):
        return {
            "d": self.d,
            "jumps": self.jumps,
            "rate_exprs": self.rate_exprs,
            "params": self.params,
            "domain": self.domain,
            "source": self.source,
        }

    def __setstate__(self, state):
        for k, v in state.items():
            object.__setattr__(self, k, v)


_SECTION_RE = re.compile(r"^\[([a-z]+)\]$")
_PARAM_RE = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)\s*=\s*(\S+)$")
_DOMAIN_RE = re.compile(r"^x([1-9]\d*)\s*(>=|<=)\s*(\S+)$")


def _strip(line):
    if "#" in line:
        line = line[: line.index("#")]
    return line.strip()


def parse_model(text):
    """Parse a config document into a :class:`Model`.

    Rejects trailing garbage: every non-blank line must belong to a known
    section and match that section's grammar.
    """
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            name = m.group(1)
            if name not in ("dimension", "params", "jumps", "domain"):
                raise ConfigError(f"unknown section [{name}]", line=lineno)
            if name in sections:
                raise ConfigError(f"duplicate section [{name}]", line=lineno)
            sections[name] = []
            current = name
            continue
        if current is None:
            raise ConfigError(f"content before any section: {line!r}", line=lineno)
        sections[current].append((lineno, line))

    if "dimension" not in sections:
        raise ConfigError("missing [dimension] section")
    dim_lines = sections["dimension"]
    if len(dim_lines) != 1:
        raise ConfigError("[dimension] must contain exactly one integer line")
    lineno, line = dim_lines[0]
    try:
        d = int(line)
    except ValueError:
        raise ConfigError(f"dimension must be an integer, got {line!r}", line=lineno) from None
    if d < 1:
        raise ConfigError("dimension must be >= 1", line=lineno)

    params = {}
    for lineno, line in sections.get("params", []):
        m = _PARAM_RE.match(line)
        if m is None:
            raise ConfigError(f"malformed parameter line: {line!r}", line=lineno)
        name, val = m.group(1), m.group(2)
        if name in params:
            raise ConfigError(f"duplicate parameter {name!r}", line=lineno)
        if ex._VAR_RE.match(name):
            raise ConfigError(f"parameter name {name!r} is reserved for variables", line=lineno)
        try:
            params[name] = float(val)
        except ValueError:
            raise ConfigError(f"bad numeric value {val!r}", line=lineno) from None

    if "jumps" not in sections or not sections["jumps"]:
        raise ConfigError("missing or empty [jumps] section")
    jumps = []
    rate_exprs = []
    for lineno, line in sections["jumps"]:
        if ":" not in line:
            raise ConfigError(f"jump line needs '<integers> : <rate>': {line!r}", line=lineno)
        vec_part, rate_part = line.split(":", 1)
        toks = vec_part.split()
        if len(toks) != d:
            raise DimensionMismatchError(
                f"jump has {len(toks)} coordinates, expected {d}", line=lineno
            )
        try:
            J = tuple(int(t) for t in toks)
        except ValueError:
            raise ConfigError(f"jump coordinates must be integers: {vec_part.strip()!r}", line=lineno) from None
        try:
            node = ex.parse_expr(rate_part.strip(), d, params.keys())
        except ConfigError as e:
            raise type(e)(f"{e.args[0]} in rate for jump {J}", line=lineno) from None
        jumps.append(J)
        rate_exprs.append(node)

    if "domain" in sections:
        lower = [-math.inf] * d
        upper = [math.inf] * d
        for lineno, line in sections["domain"]:
            m = _DOMAIN_RE.match(line)
            if m is None:
                raise ConfigError(f"malformed domain line: {line!r}", line=lineno)
            i = int(m.group(1))
            if i > d:
                raise DimensionMismatchError(f"domain variable x{i} out of range", line=lineno)
            try:
                b = float(m.group(3))
            except ValueError:
                raise ConfigError(f"bad numeric bound {m.group(3)!r}", line=lineno) from None
            if m.group(2) == ">=":
                lower[i - 1] = max(lower[i - 1], b)
            else:
                upper[i - 1] = min(upper[i - 1], b)
        domain = Domain(lower=tuple(lower), upper=tuple(upper))
    else:
        domain = Domain.nonnegative_orthant(d)

    return Model(
        d=d,
        jumps=tuple(jumps),
        rate_exprs=tuple(rate_exprs),
        params=params,
        domain=domain,
        source=text,
    )


def eval_rates(m, y, check_domain=True):
    """Rate vector (one entry per jump) at scaled state ``y``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (m.d,):
        raise DimensionMismatchError(f"point has shape {y.shape}, expected ({m.d},)")
    if check_domain and not m.domain.contains(y):
        raise DomainError(f"point {y.tolist()} outside domain")
    out = np.empty(len(m.jumps))
    for k, node in enumerate(m.rate_exprs):
        try:
            v = ex.evaluate(node, y, m.params)
        except ZeroDivisionError:
            raise RateError(f"division by zero in rate {k} at {y.tolist()}") from None
        if not math.isfinite(v):
            raise RateError(f"non-finite rate {k} at {y.tolist()}")
        if v < 0:
            raise RateError(f"negative rate {v} for jump {m.jumps[k]} at {y.tolist()}")
        out[k] = v
    return out


def eval_drift(m, y, check_domain=True):
    """Drift F(y) = sum_J J r_J(y)."""
    r = eval_rates(m, y, check_domain=check_domain)
    return m.jump_array.T.astype(float) @ r


def eval_jacobian(m, y, check_domain=True):
    """Jacobian sum_J J grad r_J(y) via expression-tree differentiation.

    Falls back to central finite differences of a rate's value when its
    symbolic derivative hits a division by zero at ``y``.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (m.d,):
        raise DimensionMismatchError(f"point has shape {y.shape}, expected ({m.d},)")
    if check_domain and not m.domain.contains(y):
        raise DomainError(f"point {y.tolist()} outside domain")
    A = np.zeros((m.d, m.d))
    J = m.jump_array.astype(float)
    for k, node in enumerate(m.rate_exprs):
        grad = np.empty(m.d)
        for i in range(m.d):
            dnode = ex.differentiate(node, i)
            try:
                grad[i] = ex.evaluate(dnode, y, m.params)
            except ZeroDivisionError:
                grad[i] = _fd_partial(node, y, i, m.params)
        A += np.outer(J[k], grad)
    return A


def _fd_partial(node, y, i, params, h=1e-6):
    yp = np.array(y, dtype=float)
    ym = np.array(y, dtype=float)
    yp[i] += h
    ym[i] -= h
    try:
        return (ex.evaluate(node, yp, params) - ex.evaluate(node, ym, params)) / (2 * h)
    except ZeroDivisionError:
        raise RateError(
            f"division by zero differentiating rate at {np.asarray(y).tolist()}"
        ) from None


def rate_gradients(m, y):
    """Gradient row vectors of every rate at ``y``, shape (n_jumps, d)."""
    y = np.asarray(y, dtype=float)
    G = np.empty((len(m.jumps), m.d))
    for k, node in enumerate(m.rate_exprs):
        for i in range(m.d):
            dnode = ex.differentiate(node, i)
            try:
                G[k, i] = ex.evaluate(dnode, y, m.params)
            except ZeroDivisionError:
                G[k, i] = _fd_partial(node, y, i, m.params)
    return G


_HAMER_SIR_TEMPLATE = """\
# Hamer-type SIR with immigration of susceptibles
[dimension]
2
[params]
alpha = {alpha!r}
beta = {beta!r}
gamma = {gamma!r}
[jumps]
-1  1 : alpha * x1 * x2
 1  0 : beta
 0 -1 : gamma * x2
[domain]
x1 >= 0
x2 >= 0
"""


def builtin_hamer_sir(alpha, beta, gamma):
    """The built-in two-type epidemic: infection, immigration, recovery.

    Rates alpha*x1*x2, beta, gamma*x2 with jumps (-1,1), (1,0), (0,-1);
    the drift fixed point is (gamma/alpha, beta/gamma).
    """
    for name, v in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
        if not (v > 0):
            raise ValueError(f"{name} must be positive, got {v}")
    return parse_model(_HAMER_SIR_TEMPLATE.format(alpha=float(alpha), beta=float(beta), gamma=float(gamma)))
