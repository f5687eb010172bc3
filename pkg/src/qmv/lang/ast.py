"""Abstract syntax for the guarded-command language.

Expression values are int, bool or Fraction (reals are exact rationals; they
become floats only where probabilities and rates are stored).  Source
positions are carried for error messages but excluded from equality so that
parse(pretty(parse(text))) is structurally equal to parse(text).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Union

from qmv.core import ModelClass
from qmv.lang.errors import EvalError

Value = Union[int, bool, Fraction]
Pos = tuple[int, int]

_NOPOS: Pos = (0, 0)


def _pos_field() -> Pos:
    return _NOPOS


@dataclass(frozen=True)
class Expr:
    pos: Pos = field(default=_NOPOS, compare=False, repr=False, kw_only=True)

    def evaluate(self, env: Mapping[str, Value]) -> Value:
        raise NotImplementedError

    def names(self) -> Iterator[str]:
        return iter(())

    def pretty(self) -> str:
        return _pp(self, 0)


@dataclass(frozen=True)
class IntLit(Expr):
    value: int

    def evaluate(self, env):
        return self.value


@dataclass(frozen=True)
class RealLit(Expr):
    """Non-integral rational literal (integral rationals fold to IntLit)."""

    value: Fraction

    def __post_init__(self):
        if self.value.denominator == 1:
            raise ValueError("integral RealLit; use IntLit")

    def evaluate(self, env):
        return self.value


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool

    def evaluate(self, env):
        return self.value


@dataclass(frozen=True)
class Name(Expr):
    name: str

    def evaluate(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise EvalError(f"undefined name {self.name!r}") from None

    def names(self):
        yield self.name


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # "-" or "!"
    operand: Expr

    def evaluate(self, env):
        v = self.operand.evaluate(env)
        if self.op == "-":
            _need_number(v, self)
            return -v
        _need_bool(v, self)
        return not v

    def names(self):
        yield from self.operand.names()


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def evaluate(self, env):
        op = self.op
        if op == "&":
            l = self.left.evaluate(env)
            _need_bool(l, self)
            return l and _checked_bool(self.right.evaluate(env), self)
        if op == "|":
            l = self.left.evaluate(env)
            _need_bool(l, self)
            return l or _checked_bool(self.right.evaluate(env), self)
        l = self.left.evaluate(env)
        r = self.right.evaluate(env)
        if op in ("=", "!="):
            if isinstance(l, bool) != isinstance(r, bool):
                raise EvalError("comparing boolean with number")
            return (l == r) if op == "=" else (l != r)
        _need_number(l, self)
        _need_number(r, self)
        if op == "+":
            return l + r
        if op == "-":
            return l - r
        if op == "*":
            return l * r
        if op == "/":
            if r == 0:
                raise EvalError("division by zero")
            return Fraction(l) / Fraction(r)
        if op == "<":
            return l < r
        if op == "<=":
            return l <= r
        if op == ">":
            return l > r
        if op == ">=":
            return l >= r
        raise EvalError(f"unknown operator {op!r}")

    def names(self):
        yield from self.left.names()
        yield from self.right.names()


@dataclass(frozen=True)
class Cond(Expr):
    """Ternary conditional ``c ? a : b``."""

    cond: Expr
    then: Expr
    other: Expr

    def evaluate(self, env):
        c = self.cond.evaluate(env)
        _need_bool(c, self)
        return self.then.evaluate(env) if c else self.other.evaluate(env)

    def names(self):
        yield from self.cond.names()
        yield from self.then.names()
        yield from self.other.names()


@dataclass(frozen=True)
class Call(Expr):
    """Built-in function application; only min and max exist."""

    fn: str
    args: tuple[Expr, ...]

    def evaluate(self, env):
        vals = [a.evaluate(env) for a in self.args]
        for v in vals:
            _need_number(v, self)
        return min(vals) if self.fn == "min" else max(vals)

    def names(self):
        for a in self.args:
            yield from a.names()


def _need_number(v, node) -> None:
    if isinstance(v, bool) or not isinstance(v, (int, Fraction)):
        raise EvalError(f"expected a number, got {v!r}")


def _need_bool(v, node) -> None:
    if not isinstance(v, bool):
        raise EvalError(f"expected a boolean, got {v!r}")


def _checked_bool(v, node) -> bool:
    _need_bool(v, node)
    return v


# precedence levels, tighter binds higher
_PREC = {
    "?:": 1,
    "|": 2,
    "&": 3,
    "=": 4, "!=": 4,
    "<": 5, "<=": 5, ">": 5, ">=": 5,
    "+": 6, "-": 6,
    "*": 7, "/": 7,
    "unary": 8,
}


def _pp(e: Expr, parent_prec: int) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, RealLit):
        # prints as a division; the parser folds it back into a literal
        text = f"{e.value.numerator}/{e.value.denominator}"
        return f"({text})" if parent_prec > _PREC["/"] else text
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Name):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(_pp(a, 0) for a in e.args)})"
    if isinstance(e, Unary):
        p = _PREC["unary"]
        inner = _pp(e.operand, p)
        text = f"{e.op}{inner}"
        return f"({text})" if parent_prec > p else text
    if isinstance(e, Binary):
        p = _PREC[e.op]
        # left-associative: right child needs strictly higher precedence
        text = f"{_pp(e.left, p)} {e.op} {_pp(e.right, p + 1)}"
        return f"({text})" if parent_prec > p else text
    if isinstance(e, Cond):
        p = _PREC["?:"]
        text = f"{_pp(e.cond, p + 1)} ? {_pp(e.then, p + 1)} : {_pp(e.other, p)}"
        return f"({text})" if parent_prec > p else text
    raise TypeError(f"not an expression: {e!r}")


@dataclass(frozen=True)
class ConstDecl:
    name: str
    type: str  # "int" | "real" | "bool"
    expr: Expr
    pos: Pos = field(default=_NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class VarDecl:
    """Bounded integer (``x : [lo..hi] init e``) or boolean variable."""

    name: str
    is_bool: bool
    lo: Expr | None
    hi: Expr | None
    init: Expr
    pos: Pos = field(default=_NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class Assignment:
    var: str
    expr: Expr
    pos: Pos = field(default=_NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class Branch:
    weight: Expr
    assignments: tuple[Assignment, ...]


@dataclass(frozen=True)
class Command:
    """``[action] guard -> w:(upd) + ...;`` or ``rate(e) guard -> ...;``

    ``action`` is None for unlabeled immediate commands and always None for
    Markovian (rate) commands, which never synchronise.
    """

    action: str | None
    rate: Expr | None
    guard: Expr
    branches: tuple[Branch, ...]
    pos: Pos = field(default=_NOPOS, compare=False, repr=False)

    @property
    def is_markovian(self) -> bool:
        return self.rate is not None


@dataclass(frozen=True)
class ProcessDef:
    name: str
    variables: tuple[VarDecl, ...]
    observes: tuple[str, ...] | None
    commands: tuple[Command, ...]
    pos: Pos = field(default=_NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class LabelDecl:
    name: str
    expr: Expr
    pos: Pos = field(default=_NOPOS, compare=False, repr=False)


@dataclass(frozen=True)
class SymbolicModel:
    model_class: ModelClass
    constants: tuple[ConstDecl, ...]
    globals_: tuple[VarDecl, ...]
    actions: tuple[str, ...]
    processes: tuple[ProcessDef, ...]
    labels: tuple[LabelDecl, ...]

    def constant_values(self) -> dict[str, Value]:
        """Evaluate constants in declaration order."""
        env: dict[str, Value] = {}
        for c in self.constants:
            v = c.expr.evaluate(env)
            if c.type == "int":
                if isinstance(v, Fraction):
                    if v.denominator != 1:
                        raise EvalError(
                            f"constant {c.name} declared int but equals {v}")
                    v = int(v)
                if isinstance(v, bool) or not isinstance(v, int):
                    raise EvalError(f"constant {c.name} is not an integer")
            elif c.type == "real":
                if isinstance(v, bool):
                    raise EvalError(f"constant {c.name} is not a number")
                if isinstance(v, int):
                    v = Fraction(v)
            else:
                if not isinstance(v, bool):
                    raise EvalError(f"constant {c.name} is not a boolean")
            env[c.name] = v
        return env

    def label_map(self) -> dict[str, Expr]:
        return {l.name: l.expr for l in self.labels}

    def used_actions(self) -> list[str]:
        seen: list[str] = []
        for p in self.processes:
            for cmd in p.commands:
                if cmd.action is not None and cmd.action not in seen:
                    seen.append(cmd.action)
        return seen

    def pretty(self) -> str:
        """Canonical source text; reparsing yields an equal model."""
        out: list[str] = [self.model_class.value, ""]
        for c in self.constants:
            out.append(f"const {c.type} {c.name} = {c.expr.pretty()};")
        if self.constants:
            out.append("")
        if self.actions:
            out.append("action " + ", ".join(self.actions) + ";")
            out.append("")
        for v in self.globals_:
            out.append("global " + _pp_vardecl(v))
        if self.globals_:
            out.append("")
        for p in self.processes:
            out.append(f"module {p.name}")
            for v in p.variables:
                out.append("  " + _pp_vardecl(v))
            if p.observes is not None:
                out.append("  observes " + ", ".join(p.observes) + ";")
            for cmd in p.commands:
                out.append("  " + _pp_command(cmd))
            out.append("endmodule")
            out.append("")
        for l in self.labels:
            out.append(f'label "{l.name}" = {l.expr.pretty()};')
        return "\n".join(out).rstrip() + "\n"


def _pp_vardecl(v: VarDecl) -> str:
    dom = "bool" if v.is_bool else f"[{v.lo.pretty()}..{v.hi.pretty()}]"
    return f"{v.name} : {dom} init {v.init.pretty()};"


def _pp_command(cmd: Command) -> str:
    head = f"rate({cmd.rate.pretty()})" if cmd.is_markovian else (
        f"[{cmd.action}]" if cmd.action else "[]")
    branches = " + ".join(
        f"{b.weight.pretty()}:("
        + ", ".join(f"{a.var}' = {a.expr.pretty()}" for a in b.assignments)
        + ")"
        for b in cmd.branches
    )
    return f"{head} {cmd.guard.pretty()} -> {branches};"
