"""Kernels, sampling distributions, and deterministic random streams.

A kernel of arity m maps m sample points (plus, when index-weighted, the
1-based index tuple of the summand) to a point of its codomain.  Kernel
bodies are written against numpy broadcasting so the same body evaluates a
single tuple or a whole batch of tuples in one call; every engine in this
package relies on that for throughput.

Randomness is counter-based: a stream is keyed by the master seed plus a
path of integers (replication index, purpose tag, ...), so any stream can
be reconstructed independently of scheduling and thread count.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .spaces import BanachSpaceDescriptor, real_line

__all__ = [
    "Distribution",
    "Kernel",
    "builtin_kernel",
    "evaluate",
    "evaluate_batch",
    "kernel_from_expression",
    "sample_iid",
    "stream",
]


# ---------------------------------------------------------------------------
# random streams


def _path_element(x) -> int:
    if isinstance(x, (int, np.integer)):
        if x < 0:
            raise ValueError("stream path elements must be nonnegative")
        return int(x)
    if isinstance(x, str):
        digest = hashlib.sha256(x.encode("utf8")).digest()
        return int.from_bytes(digest[:4], "big")
    raise TypeError(f"stream path element {x!r} must be an int or str")


def stream(seed: int, *path) -> np.random.Generator:
    """Philox generator keyed by (seed, path); independent of thread count."""
    ss = np.random.SeedSequence(
        entropy=int(seed), spawn_key=tuple(_path_element(x) for x in path)
    )
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class Distribution:
    """A one-dimensional sampling law for the i.i.d. inputs.

    Families: "rademacher", "uniform" (a, b), "gaussian" (mean, sd), and
    "finite" (atoms with probabilities).  Finite-support families expose
    their atoms through support(), which unlocks the exact enumeration
    paths in the decomposition and tail machinery.
    """

    family: str
    params: tuple = ()

    @classmethod
    def rademacher(cls) -> "Distribution":
        return cls("rademacher")

    @classmethod
    def uniform(cls, a: float, b: float) -> "Distribution":
        if not a < b:
            raise ValueError("uniform interval requires a < b")
        return cls("uniform", (float(a), float(b)))

    @classmethod
    def gaussian(cls, mean: float = 0.0, sd: float = 1.0) -> "Distribution":
        if sd <= 0:
            raise ValueError("gaussian sd must be positive")
        return cls("gaussian", (float(mean), float(sd)))

    @classmethod
    def finite(cls, values: Sequence[float], probabilities: Sequence[float]) -> "Distribution":
        v = tuple(float(x) for x in values)
        p = tuple(float(x) for x in probabilities)
        if len(v) != len(p) or not v:
            raise ValueError("values and probabilities must be nonempty, same length")
        if any(x < 0 for x in p) or abs(sum(p) - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        return cls("finite", (v, p))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.family == "rademacher":
            return rng.integers(0, 2, size=size).astype(np.float64) * 2.0 - 1.0
        if self.family == "uniform":
            a, b = self.params
            return rng.uniform(a, b, size=size)
        if self.family == "gaussian":
            mean, sd = self.params
            return rng.normal(mean, sd, size=size)
        if self.family == "finite":
            values, probs = self.params
            cum = np.cumsum(probs)
            cum[-1] = 1.0
            idx = np.searchsorted(cum, rng.random(size), side="right")
            return np.asarray(values, dtype=np.float64)[idx]
        raise ValueError(f"unknown family {self.family!r}")

    def support(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Atoms and probabilities for finite-support laws, else None."""
        if self.family == "rademacher":
            return np.array([-1.0, 1.0]), np.array([0.5, 0.5])
        if self.family == "finite":
            values, probs = self.params
            return np.asarray(values, dtype=np.float64), np.asarray(probs, dtype=np.float64)
        return None

    def mean(self) -> float:
        if self.family == "rademacher":
            return 0.0
        if self.family == "uniform":
            a, b = self.params
            return 0.5 * (a + b)
        if self.family == "gaussian":
            return self.params[0]
        if self.family == "finite":
            values, probs = self.params
            return float(np.dot(values, probs))
        raise ValueError(f"unknown family {self.family!r}")

    def to_dict(self) -> dict:
        if self.family == "rademacher":
            return {"family": "rademacher"}
        if self.family == "uniform":
            a, b = self.params
            return {"family": "uniform", "a": a, "b": b}
        if self.family == "gaussian":
            mean, sd = self.params
            return {"family": "gaussian", "mean": mean, "sd": sd}
        values, probs = self.params
        return {"family": "finite", "values": list(values), "probabilities": list(probs)}

    @classmethod
    def from_dict(cls, d: dict) -> "Distribution":
        family = d.get("family")
        if family == "rademacher":
            return cls.rademacher()
        if family == "uniform":
            return cls.uniform(d["a"], d["b"])
        if family == "gaussian":
            return cls.gaussian(d.get("mean", 0.0), d.get("sd", 1.0))
        if family == "finite":
            return cls.finite(d["values"], d["probabilities"])
        raise ValueError(f"unknown distribution family {family!r}")


def sample_iid(dist: Distribution, n: int, seed: int, stream_path=0) -> np.ndarray:
    """Draw n i.i.d. points from the stream keyed by (seed, stream_path)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    path = stream_path if isinstance(stream_path, tuple) else (stream_path,)
    return dist.sample(stream(seed, *path), n)


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class Kernel:
    """A broadcast-friendly kernel body with its shape metadata.

    body(xs, idx) receives a tuple of m numpy-broadcastable arguments and,
    when the kernel is index-weighted, a tuple of m 1-based index values
    broadcast the same way; it must return a scalar/array for a scalar
    codomain or an array with trailing axis codomain.dimension otherwise.
    The symmetric flag is a promise used by the decomposition machinery;
    it is spot-checked by tests, never silently assumed correct.
    """

    arity: int
    body: Callable
    weighted: bool = False
    symmetric: bool = False
    codomain: BanachSpaceDescriptor = field(default_factory=real_line)
    name: str = ""

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise ValueError("kernel arity must be at least 1")


def evaluate(kernel: Kernel, values: Sequence[float], index: Sequence[int] | None = None):
    """Evaluate one summand; index is the 0-based increasing tuple.

    Index-weighted kernels see 1-based index values. Returns a float for a
    one-dimensional codomain and a numpy vector otherwise.
    """
    if len(values) != kernel.arity:
        raise ValueError(f"kernel has arity {kernel.arity}, got {len(values)} values")
    xs = tuple(np.float64(v) for v in values)
    idx = None
    if kernel.weighted:
        if index is None:
            raise ValueError("index-weighted kernel requires the index tuple")
        idx = tuple(np.float64(int(i) + 1) for i in index)
    out = kernel.body(xs, idx)
    if kernel.codomain.dimension == 1:
        return float(out)
    return np.asarray(out, dtype=np.float64)


def evaluate_batch(
    kernel: Kernel,
    columns: Sequence[np.ndarray],
    index_columns: Sequence[np.ndarray] | None = None,
) -> np.ndarray:
    """Evaluate a batch of summands given per-coordinate value columns.

    Columns must broadcast against each other; index columns hold 0-based
    sample indices and are converted to the 1-based values kernels see.
    """
    if len(columns) != kernel.arity:
        raise ValueError(f"kernel has arity {kernel.arity}, got {len(columns)} columns")
    xs = tuple(np.asarray(c, dtype=np.float64) for c in columns)
    idx = None
    if kernel.weighted:
        if index_columns is None:
            raise ValueError("index-weighted kernel requires index columns")
        idx = tuple(np.asarray(c, dtype=np.float64) + 1.0 for c in index_columns)
    out = kernel.body(xs, idx)
    return np.asarray(out, dtype=np.float64)


# ---------------------------------------------------------------------------
# builtin kernel zoo


def _product_body(xs, idx):
    out = xs[0]
    for x in xs[1:]:
        out = out * x
    return out


def _sum_body(xs, idx):
    out = xs[0]
    for x in xs[1:]:
        out = out + x
    return out


def builtin_kernel(name: str, m: int = 2, **params) -> Kernel:
    """Construct a kernel from the builtin zoo.

    Available names:
      product            x_1 * ... * x_m; degenerate of full order under a
                         centered law.
      sum                x_1 + ... + x_m; never degenerate beyond order 1
                         under a nondegenerate law.
      centered-product   (x_1 - mu) * ... * (x_m - mu) with mu a parameter;
                         degenerate of full order when mu is the law's mean.
      covariance         (x - y)^2 / 2, arity 2.
      sign               sign(y - x), arity 2; antisymmetric, so the
                         symmetric flag stays off.
    """
    if name == "product":
        return Kernel(m, _product_body, symmetric=True, name="product")
    if name == "sum":
        return Kernel(m, _sum_body, symmetric=True, name="sum")
    if name == "centered-product":
        mu = float(params.get("mu", 0.0))

        def centered(xs, idx, _mu=mu):
            out = xs[0] - _mu
            for x in xs[1:]:
                out = out * (x - _mu)
            return out

        return Kernel(m, centered, symmetric=True, name="centered-product")
    if name == "covariance":
        if m != 2:
            raise ValueError("covariance kernel has arity 2")
        return Kernel(2, lambda xs, idx: 0.5 * (xs[0] - xs[1]) ** 2,
                      symmetric=True, name="covariance")
    if name == "sign":
        if m != 2:
            raise ValueError("sign kernel has arity 2")
        return Kernel(2, lambda xs, idx: np.sign(xs[1] - xs[0]),
                      symmetric=False, name="sign")
    raise ValueError(f"unknown builtin kernel {name!r}")


# ---------------------------------------------------------------------------
# expression kernels

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_UNARY_FUNCS = {"abs": np.abs, "sign": np.sign, "exp": np.exp}
_BINARY_FUNCS = {"min": np.minimum, "max": np.maximum}


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ValueError(f"unexpected character at position {pos}: {text[pos]!r}")
        if match.lastgroup == "num":
            tokens.append(("num", match.group("num")))
        elif match.lastgroup == "name":
            tokens.append(("name", match.group("name")))
        else:
            tokens.append(("op", match.group("op")))
        pos = match.end()
    tokens.append(("end", ""))
    return tokens


class _Parser:
    """Recursive-descent parser producing closure trees over an env dict."""

    def __init__(self, text: str, variables: set[str]):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.variables = variables
        self.used: set[str] = set()

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, text = self.advance()
        if kind != "op" or text != op:
            raise ValueError(f"expected {op!r}, got {text!r}")

    def parse(self):
        node = self.additive()
        kind, text = self.peek()
        if kind != "end":
            raise ValueError(f"trailing input at {text!r}")
        return node

    def additive(self):
        node = self.multiplicative()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            op = self.advance()[1]
            rhs = self.multiplicative()
            if op == "+":
                node = (lambda env, a=node, b=rhs: a(env) + b(env))
            else:
                node = (lambda env, a=node, b=rhs: a(env) - b(env))
        return node

    def multiplicative(self):
        node = self.unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            op = self.advance()[1]
            rhs = self.unary()
            if op == "*":
                node = (lambda env, a=node, b=rhs: a(env) * b(env))
            else:
                node = (lambda env, a=node, b=rhs: a(env) / b(env))
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.advance()
            inner = self.unary()
            return lambda env, a=inner: -a(env)
        if self.peek() == ("op", "+"):
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek() == ("op", "^"):
            self.advance()
            exponent = self.unary()
            return lambda env, a=base, b=exponent: np.power(a(env), b(env))
        return base

    def primary(self):
        kind, text = self.advance()
        if kind == "num":
            value = np.float64(text)
            return lambda env, v=value: v
        if kind == "name":
            if self.peek() == ("op", "("):
                return self.call(text)
            if text not in self.variables:
                allowed = ", ".join(sorted(self.variables))
                raise ValueError(f"unknown variable {text!r}; allowed: {allowed}")
            self.used.add(text)
            return lambda env, name=text: env[name]
        if (kind, text) == ("op", "("):
            node = self.additive()
            self.expect_op(")")
            return node
        raise ValueError(f"unexpected token {text!r}")

    def call(self, fname: str):
        self.expect_op("(")
        args = [self.additive()]
        while self.peek() == ("op", ","):
            self.advance()
            args.append(self.additive())
        self.expect_op(")")
        if fname in _UNARY_FUNCS:
            if len(args) != 1:
                raise ValueError(f"{fname} takes one argument")
            fn = _UNARY_FUNCS[fname]
            return lambda env, a=args[0], f=fn: f(a(env))
        if fname in _BINARY_FUNCS:
            if len(args) != 2:
                raise ValueError(f"{fname} takes two arguments")
            fn = _BINARY_FUNCS[fname]
            return lambda env, a=args[0], b=args[1], f=fn: f(a(env), b(env))
        raise ValueError(f"unknown function {fname!r}")


def kernel_from_expression(
    text: str,
    m: int,
    symmetric: bool = False,
    codomain: BanachSpaceDescriptor | None = None,
) -> Kernel:
    """Compile an arithmetic expression over x1..xm (and i1..im) to a kernel.

    Index variables i1..im take the 1-based index values of the summand;
    using any of them makes the kernel index-weighted.  Operators are
    + - * / ^ with the functions abs, sign, exp, min, max.  Arithmetic is
    IEEE: division by zero and invalid powers propagate inf/nan rather
    than raising.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    xvars = {f"x{j + 1}" for j in range(m)}
    ivars = {f"i{j + 1}" for j in range(m)}
    parser = _Parser(text, xvars | ivars)
    node = parser.parse()
    used_ivars = sorted(parser.used & ivars)
    weighted = bool(used_ivars)

    def body(xs, idx, _node=node, _m=m):
        env = {f"x{j + 1}": xs[j] for j in range(_m)}
        if idx is not None:
            env.update({f"i{j + 1}": idx[j] for j in range(_m)})
        return _node(env)

    return Kernel(
        arity=m,
        body=body,
        weighted=weighted,
        symmetric=symmetric,
        codomain=codomain if codomain is not None else real_line(),
        name=f"expr:{text}",
    )


def kernel_from_config(d: dict) -> Kernel:
    """Build a kernel from a JSON-style mapping (builtin name or expression)."""
    m = int(d.get("m", 2))
    if "name" in d:
        params = {k: v for k, v in d.items() if k not in ("name", "m")}
        return builtin_kernel(d["name"], m, **params)
    if "expr" in d:
        return kernel_from_expression(
            d["expr"], m, symmetric=bool(d.get("symmetric", False))
        )
    raise ValueError("kernel config needs a builtin 'name' or an 'expr'")
