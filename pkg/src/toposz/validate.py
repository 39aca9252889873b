"""False positives, false negatives and false types between two simplified trees."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field as dc_field

from .topology import KIND_NAMES, Branch, ContourTree, branch_decomposition, leaf_arcs

KINDS = ("FP", "FN", "FT")


@dataclass(frozen=True)
class FalseCase:
    """One mismatch between the original and decompressed simplified trees.

    For an FP, ``saddle`` and ``dec_arc`` locate the spurious leaf arc in the
    decompressed tree. For FN/FT, ``saddle`` and ``orig_arc`` locate the leaf
    arc of the original tree.
    """

    kind: str
    extremum: int
    kind_orig: str
    kind_dec: str
    persistence: float
    branch: Branch
    saddle: int
    orig_arc: int = -1
    dec_arc: int = -1
    dec_tree: ContourTree | None = dc_field(default=None, repr=False, compare=False)

    def to_line(self) -> str:
        return f"{self.kind} {self.extremum} {self.kind_orig} {self.kind_dec} {self.persistence!r}"


@dataclass
class FalseCaseReport:
    cases: list[FalseCase]

    @property
    def counts(self) -> dict[str, int]:
        c = Counter(case.kind for case in self.cases)
        return {k: c.get(k, 0) for k in KINDS}

    def __len__(self):
        return len(self.cases)

    def __bool__(self):
        return bool(self.cases)

    def to_text(self) -> str:
        return "".join(case.to_line() + "\n" for case in self.cases)


def _fp(x, dec, bd, ld):
    arc, adj = ld[x]
    return FalseCase(
        "FP", x, "none", KIND_NAMES[bd[x].kind], bd[x].persistence, bd[x],
        saddle=int(dec.node_vertex[adj]), dec_arc=arc, dec_tree=dec,
    )


def _fn(kind, x, orig, bo, lo, kind_dec="none"):
    arc, adj = lo[x]
    return FalseCase(
        kind, x, KIND_NAMES[bo[x].kind], kind_dec, bo[x].persistence, bo[x],
        saddle=int(orig.node_vertex[adj]), orig_arc=arc,
    )


def detect_false_cases(tree_orig: ContourTree, tree_dec: ContourTree) -> FalseCaseReport:
    """Match leaf branches by extremum vertex and classify the differences.

    Matched branches that hang off different (matched) parent branches are
    reported as an FP on the decompressed side plus an FN on the original.
    """
    if tuple(tree_orig.dims) != tuple(tree_dec.dims):
        raise ValueError(f"trees live on different grids: {tree_orig.dims} vs {tree_dec.dims}")
    bo = branch_decomposition(tree_orig)
    bd = branch_decomposition(tree_dec)
    lo = leaf_arcs(tree_orig)
    ld = leaf_arcs(tree_dec)
    cases = []
    for x in sorted(set(bo) | set(bd)):
        if x not in bo:
            cases.append(_fp(x, tree_dec, bd, ld))
        elif x not in bd:
            cases.append(_fn("FN", x, tree_orig, bo, lo))
        elif bo[x].kind != bd[x].kind:
            cases.append(_fn("FT", x, tree_orig, bo, lo, kind_dec=KIND_NAMES[bd[x].kind]))
        else:
            po, pd = bo[x].parent, bd[x].parent
            matched = (po == -1 or (po in bd)) and (pd == -1 or (pd in bo))
            if po != pd and matched:
                cases.append(_fp(x, tree_dec, bd, ld))
                cases.append(_fn("FN", x, tree_orig, bo, lo))
    return FalseCaseReport(cases)
