"""Micro-IR shared by both architectures.

Operand templates are ordinary expressions whose ``Loc`` leaves read the
current value of a register or per-instruction temporary (``t0``, ``t1``..).
Registers are always written at full width; sub-register writes are
expressed by the lifter as explicit zero-extension or merges.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from keysim.expr import BinKind, Expr, UnKind
from keysim.simplify.text import canonical_text


class Flavor(enum.Enum):
    SUB_CMP = "cmp"
    AND_TST = "tst"


class Cond(enum.Enum):
    EQ = "eq"
    NE = "ne"
    LT = "lt"
    LE = "le"
    GT = "gt"
    GE = "ge"
    LO = "lo"  # unsigned below
    LS = "ls"  # unsigned below or equal
    HI = "hi"
    HS = "hs"
    MI = "mi"
    PL = "pl"
    VS = "vs"
    VC = "vc"
    PE = "pe"
    PO = "po"


@dataclass(frozen=True)
class Move:
    dst: str
    src: Expr

    def __str__(self):
        return f"MOVE {self.dst} := {canonical_text(self.src)}"


@dataclass(frozen=True)
class Bin:
    kind: BinKind | UnKind
    dst: str
    lhs: Expr
    rhs: Expr | None = None
    sets_flags: bool = False

    def __str__(self):
        rhs = "" if self.rhs is None else f", {canonical_text(self.rhs)}"
        flag = " [flags]" if self.sets_flags else ""
        return f"BINOP {self.kind.name} {self.dst} := {canonical_text(self.lhs)}{rhs}{flag}"


@dataclass(frozen=True)
class Load:
    dst: str
    addr: Expr
    width: int

    def __str__(self):
        return f"LOAD{self.width} {self.dst} := [{canonical_text(self.addr)}]"


@dataclass(frozen=True)
class Store:
    addr: Expr
    src: Expr
    width: int

    def __str__(self):
        return f"STORE{self.width} [{canonical_text(self.addr)}] := {canonical_text(self.src)}"


@dataclass(frozen=True)
class Compare:
    lhs: Expr
    rhs: Expr
    flavor: Flavor

    def __str__(self):
        return f"COMPARE.{self.flavor.value} {canonical_text(self.lhs)}, {canonical_text(self.rhs)}"


@dataclass(frozen=True)
class Branch:
    cond: Cond | None = None

    def __str__(self):
        return f"BRANCH {self.cond.value if self.cond else 'always'}"


@dataclass(frozen=True)
class Call:
    target: str
    indirect: bool = False

    def __str__(self):
        return f"CALL {'*' if self.indirect else ''}{self.target}"


@dataclass(frozen=True)
class Return:
    def __str__(self):
        return "RET"


@dataclass(frozen=True)
class Push:
    src: Expr
    width: int

    def __str__(self):
        return f"PUSH{self.width} {canonical_text(self.src)}"


@dataclass(frozen=True)
class Pop:
    dst: str
    width: int

    def __str__(self):
        return f"POP{self.width} {self.dst}"


@dataclass(frozen=True)
class Unsupported:
    """Placeholder for an instruction outside the lifted subset.

    Executing it havocs ``dsts`` with fresh symbols.
    """

    mnemonic: str
    dsts: tuple[str, ...] = ()

    def __str__(self):
        return f"UNSUPPORTED {self.mnemonic}"


MicroOp = Move | Bin | Load | Store | Compare | Branch | Call | Return | Push | Pop | Unsupported
