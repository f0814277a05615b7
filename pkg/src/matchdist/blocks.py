"""Blocks of a given graph shape and stability audits.

A block of shape ``G`` on ``n`` vertices assigns a matched type ``(t_j, Y_j)``
to every vertex and a contract to every directed edge.  Vertex ``j`` signs
side 1 of the contracts on its out-edges and side 2 of those on its in-edges;
these form the multiset ``Z_j``.  The block is valid when every vertex can
keep some part ``S_j`` of its current contracts such that ``W_j = Z_j + S_j``
is feasible and strictly better than ``Y_j``.

Vertices are numbered from 0.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Callable, Iterable, Optional

import networkx as nx
import numpy as np
from scipy.stats import binomtest

from .market import MatchedType, MatchingProblem
from .multispace import EMPTY, Multiset, enumerate_submultisets, point_key, sided
from .outcome import Outcome, positive_mass_subtypes

DEFAULT_EPS = 1e-9
MAX_SHAPE_VERTICES = 6
MAX_ALL_GRAPHS_VERTICES = 4


class AuditTooLarge(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# shapes

@dataclass(frozen=True)
class BlockShape:
    n: int
    edges: tuple

    def __post_init__(self):
        edges = tuple(sorted(tuple(e) for e in self.edges))
        object.__setattr__(self, "edges", edges)
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate edge")
        for k, l in edges:
            if k == l:
                raise ValueError("self-loop")
            if not (0 <= k < self.n and 0 <= l < self.n):
                raise ValueError(f"edge {(k, l)} outside {self.n} vertices")

    def degree(self, j: int) -> int:
        return sum((k == j) + (l == j) for k, l in self.edges)

    @property
    def max_degree(self) -> int:
        return max((self.degree(j) for j in range(self.n)), default=0)

    @property
    def is_tree(self) -> bool:
        if len(self.edges) != self.n - 1:
            return False
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g.number_of_edges() == self.n - 1 and nx.is_connected(g)

    def canonical(self) -> tuple:
        """Smallest edge list over all vertex relabellings."""
        return _canonical_edges(self.n, self.edges)


@lru_cache(maxsize=None)
def _canonical_edges(n: int, edges: tuple) -> tuple:
    best = None
    for perm in itertools.permutations(range(n)):
        relabelled = tuple(sorted((perm[k], perm[l]) for k, l in edges))
        if best is None or relabelled < best:
            best = relabelled
    return best


PAIRWISE = BlockShape(2, ((0, 1),))


def _labeled_trees(n: int):
    if n == 2:
        yield ((0, 1),)
        return
    for seq in itertools.product(range(n), repeat=n - 2):
        tree = nx.from_prufer_sequence(list(seq))
        yield tuple(sorted(tuple(sorted(e)) for e in tree.edges()))


@lru_cache(maxsize=None)
def enumerate_shapes(family: str, n_max: int, n_min: int = 2) -> tuple:
    """Shapes of a stability family with ``n_min <= n <= n_max`` vertices.

    ``pairwise`` gives both orientations of the single edge; ``trees`` all
    labelled trees (via Pruefer sequences) with every edge orientation;
    ``all`` every simple directed graph with at least one edge, one
    representative per isomorphism class.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    if n_max > MAX_SHAPE_VERTICES:
        raise ValueError(f"n_max > {MAX_SHAPE_VERTICES} is not supported")
    if family == "pairwise":
        return (PAIRWISE, BlockShape(2, ((1, 0),))) if n_min <= 2 else ()
    shapes = []
    if family == "trees":
        for n in range(max(2, n_min), n_max + 1):
            for tree in _labeled_trees(n):
                for flips in itertools.product((False, True), repeat=len(tree)):
                    edges = tuple((l, k) if f else (k, l) for (k, l), f in zip(tree, flips))
                    shapes.append(BlockShape(n, edges))
        return tuple(shapes)
    if family == "all":
        if n_max > MAX_ALL_GRAPHS_VERTICES:
            raise ValueError(f"family 'all' is limited to n_max <= {MAX_ALL_GRAPHS_VERTICES}")
        for n in range(max(2, n_min), n_max + 1):
            pairs = list(itertools.combinations(range(n), 2))
            seen = set()
            for states in itertools.product((0, 1, 2), repeat=len(pairs)):
                edges = tuple(
                    (k, l) if s == 1 else (l, k) for (k, l), s in zip(pairs, states) if s
                )
                if not edges:
                    continue
                key = _canonical_edges(n, tuple(sorted(edges)))
                if key not in seen:
                    seen.add(key)
                    shapes.append(BlockShape(n, key))
        return tuple(shapes)
    raise ValueError(f"unknown family {family!r}")


@lru_cache(maxsize=None)
def shape_classes(family: str, n_max: int, n: int, max_degree: int) -> tuple:
    """Isomorphism classes of size-``n`` shapes whose degrees fit the bound.

    Audits enumerate every ordered n-tuple of matched types, so one shape per
    isomorphism class covers all labellings.
    """
    if n > n_max:
        return ()
    out, seen = [], set()
    for s in enumerate_shapes(family, n_max, n):
        if s.n != n or s.max_degree > max_degree:
            continue
        key = s.canonical()
        if key not in seen:
            seen.add(key)
            out.append(BlockShape(n, key))
    return tuple(out)


# ---------------------------------------------------------------------------
# certificates

@dataclass(frozen=True)
class BlockCertificate:
    shape: BlockShape
    vertex_subtypes: tuple
    edge_contracts: tuple
    improving_sets: tuple
    margins: tuple

    def __post_init__(self):
        if any(m <= 0 for m in self.margins):
            raise ValueError("block margins must be strictly positive")

    @property
    def min_margin(self):
        return min(self.margins)


def strictly_positive(gain, eps) -> bool:
    if isinstance(gain, Rational):
        return gain > 0
    return gain > eps


def assemble_Z(shape: BlockShape, j: int, edge_contracts) -> Multiset:
    """Side-1 copies for out-edges of ``j``, side-2 copies for in-edges."""
    if isinstance(edge_contracts, dict):
        edge_contracts = tuple(edge_contracts[e] for e in shape.edges)
    xs = []
    for (k, l), y in zip(shape.edges, edge_contracts):
        if k == j:
            xs.append(sided(y, 1))
        if l == j:
            xs.append(sided(y, 2))
    return Multiset(xs)


@lru_cache(maxsize=65536)
def _submultisets(Y: Multiset) -> tuple:
    return tuple(enumerate_submultisets(Y))


def _best_vertex_move(p: MatchingProblem, t, Y: Multiset, Z: Multiset, eps):
    """Max-gain ``W = Z + S`` with ``S`` a multisubset of ``Y``, or None."""
    if len(Z) > p.N or not all(p.sided_feasible(t, x) for x in Z.support()):
        return None
    u_now = p.u(t, Y)
    best = None
    for S in _submultisets(Y):
        if len(Z) + len(S) > p.N:
            continue
        W = Z + S
        gain = p.u(t, W) - u_now
        if strictly_positive(gain, eps) and (best is None or gain > best[1]):
            best = (W, gain)
    return best


def is_individual_block(p: MatchingProblem, s, eps=DEFAULT_EPS):
    """Best strict multisubset ``W`` of the held contracts, if it improves."""
    t, Y = s
    u_now = p.u(t, Y)
    best = None
    for W in enumerate_submultisets(Y):
        if W == Y:
            continue
        gain = p.u(t, W) - u_now
        if strictly_positive(gain, eps) and (best is None or gain > best[1]):
            best = (W, gain)
    return best


def is_g_block(p: MatchingProblem, shape: BlockShape, vertex_subtypes, edge_contracts,
               eps=DEFAULT_EPS) -> Optional[BlockCertificate]:
    vertex_subtypes = tuple(MatchedType(*s) for s in vertex_subtypes)
    if isinstance(edge_contracts, dict):
        edge_contracts = tuple(edge_contracts[e] for e in shape.edges)
    edge_contracts = tuple(edge_contracts)
    if len(vertex_subtypes) != shape.n or len(edge_contracts) != len(shape.edges):
        raise ValueError("subtypes/contracts do not fit the shape")
    for (k, l), y in zip(shape.edges, edge_contracts):
        if y not in p.pair_contracts(vertex_subtypes[k].t, vertex_subtypes[l].t):
            return None
    improving, margins = [], []
    for j, (t, Y) in enumerate(vertex_subtypes):
        move = _best_vertex_move(p, t, Y, assemble_Z(shape, j, edge_contracts), eps)
        if move is None:
            return None
        improving.append(move[0])
        margins.append(move[1])
    return BlockCertificate(shape, vertex_subtypes, edge_contracts, tuple(improving), tuple(margins))


_MISSING = object()


class _BlockSearch:
    """Backtracking search for a block on a fixed tuple and shape.

    Edge contracts are assigned in edge order.  A vertex is checked as soon
    as all its incident edges carry contracts, and the branch is cut when it
    has no improving move.  Vertex checks are memoised by value.
    """

    def __init__(self, p: MatchingProblem, eps, contract_search=None):
        self.p = p
        self.eps = eps
        self.search = None if contract_search is None else frozenset(contract_search)
        self.memo: dict = {}
        self.fast: dict = {}
        self.id_cands: dict = {}
        self.contract_ids: dict = {}
        self.type_of: list = []
        self.cand_memo: dict = {}

    def candidates(self, t, t2) -> tuple:
        key = (t, t2)
        got = self.cand_memo.get(key)
        if got is None:
            ys = self.p.pair_contracts(t, t2)
            if self.search is not None:
                ys = ys & self.search
            got = tuple(sorted(ys, key=point_key))
            self.cand_memo[key] = got
        return got

    def index(self, subtypes) -> None:
        """Label subtypes by position so ``best(..., ids=...)`` can key its
        caches by integers."""
        tids: dict = {}
        self.type_of = [tids.setdefault(s[0], len(tids)) for s in subtypes]

    def _cid(self, y) -> int:
        got = self.contract_ids.get(y)
        if got is None:
            got = self.contract_ids[y] = len(self.contract_ids)
        return got

    def vertex(self, s, Z):
        key = (s, Z)
        if key not in self.memo:
            self.memo[key] = _best_vertex_move(self.p, s[0], s[1], Z, self.eps)
        return self.memo[key]

    def best(self, shape: BlockShape, subtypes: tuple, first_only=False, ids=None):
        """``ids`` are optional positions of the subtypes in the list given
        to ``index``.  They only make memo keys cheaper."""
        edges = shape.edges
        if ids is None:
            ids = subtypes
        cands = []
        type_of = self.type_of if ids is not subtypes else None
        for k, l in edges:
            key = (ids[k], ids[l]) if type_of is None else (type_of[ids[k]], type_of[ids[l]])
            c = self.id_cands.get(key)
            if c is None:
                ys = self.candidates(subtypes[k][0], subtypes[l][0])
                c = self.id_cands[key] = (ys, tuple(self._cid(y) for y in ys))
            if not c[0]:
                return None
            cands.append(c)
        # vertices completed once edge i is assigned
        last = [-1] * shape.n
        for i, (k, l) in enumerate(edges):
            last[k] = max(last[k], i)
            last[l] = max(last[l], i)
        if min(last) < 0:
            return None
        done_at = [[j for j in range(shape.n) if last[j] == i] for i in range(len(edges))]
        incident = [[(e, 1 if k == j else 2) for e, (k, l) in enumerate(edges) if j in (k, l)]
                    for j in range(shape.n)]
        cid = [0] * len(edges)
        chosen = [None] * len(edges)
        moves = [None] * shape.n
        best = [None]

        def rec(i):
            if i == len(edges):
                cert = BlockCertificate(
                    shape, subtypes, tuple(chosen),
                    tuple(m[0] for m in moves), tuple(m[1] for m in moves),
                )
                if best[0] is None or cert.min_margin > best[0].min_margin:
                    best[0] = cert
                return first_only
            ys, cids = cands[i]
            for y, c in zip(ys, cids):
                chosen[i] = y
                cid[i] = c
                ok = True
                for j in done_at[i]:
                    # edges after i never touch a vertex completed at i
                    # cheap key first; Z is only built on a memo miss
                    key = (ids[j], tuple((cid[e], side) for e, side in incident[j]))
                    mv = self.fast.get(key, _MISSING)
                    if mv is _MISSING:
                        mv = self.vertex(subtypes[j], assemble_Z(shape, j, chosen))
                        self.fast[key] = mv
                    if mv is None:
                        ok = False
                        break
                    moves[j] = mv
                if ok and rec(i + 1):
                    return True
            chosen[i] = None
            return False

        rec(0)
        return best[0]


# ---------------------------------------------------------------------------
# audits

@dataclass
class AuditReport:
    stable: bool
    family: str
    n_max: int
    eps: float
    individual_block: Optional[tuple] = None
    certificate: Optional[BlockCertificate] = None
    blocked_mass: dict = field(default_factory=dict)
    support_size: int = 0
    shapes_per_n: dict = field(default_factory=dict)
    tuples_scanned: int = 0
    exhaustive: bool = True

    @property
    def verdict(self) -> str:
        return "stable" if self.stable else "blocked"


def _chunks(n_items: int, n_chunks: int):
    size = max(1, math.ceil(n_items / max(1, n_chunks)))
    return [range(i, min(n_items, i + size)) for i in range(0, n_items, size)]


def _as_outcome_measure(o):
    return o.measure if isinstance(o, Outcome) else o


def audit_stability(o: Outcome, family: str = "pairwise", n_max: int = 2,
                    contract_search: Optional[Iterable] = None, eps=DEFAULT_EPS,
                    first_only: bool = False, workers: int = 1,
                    max_tuples: int = 20_000_000,
                    tuple_filter: Optional[Callable] = None,
                    order: Optional[list] = None) -> AuditReport:
    """Exhaustive scan of every tuple of positive-mass matched types.

    The reported certificate is the one with the largest minimum margin
    (first found on ties, in scan order).  ``blocked_mass[n]`` is the exact
    product mass of the blocked n-tuples; it is omitted when ``first_only``.
    ``order`` optionally permutes the scan order of support atoms.
    """
    p = o.problem
    support = positive_mass_subtypes(o)
    if order is not None:
        support = [support[i] for i in order]
    subtypes = [s for s, _ in support]
    weights = [w for _, w in support]
    S = len(subtypes)
    shapes_per_n = {
        n: shape_classes(family, n_max, n, p.N) for n in range(2, n_max + 1)
    }
    work = sum(S ** n * len(sh) for n, sh in shapes_per_n.items())
    if work > max_tuples:
        raise AuditTooLarge(f"{work} tuple/shape combinations exceed the limit {max_tuples}")
    report = AuditReport(
        stable=True, family=family, n_max=n_max, eps=eps, support_size=S,
        shapes_per_n={n: len(v) for n, v in shapes_per_n.items()},
        exhaustive=not first_only,
    )
    for s in subtypes:
        ib = is_individual_block(p, s, eps)
        if ib is not None:
            report.stable = False
            report.individual_block = (s, ib[0], ib[1])
            if first_only:
                return report
            break

    search = _BlockSearch(p, eps, contract_search)
    search.index(subtypes)

    def scan(n, shapes, first_range):
        best, mass, scanned = None, Fraction(0), 0
        for i0 in first_range:
            for rest in itertools.product(range(S), repeat=n - 1):
                idx = (i0,) + rest
                if tuple_filter is not None and not tuple_filter(tuple(subtypes[i] for i in idx)):
                    continue
                scanned += 1
                tup = tuple(subtypes[i] for i in idx)
                hit = None
                for shape in shapes:
                    cert = search.best(shape, tup, first_only, idx)
                    if cert is not None and (hit is None or cert.min_margin > hit.min_margin):
                        hit = cert
                        if first_only:
                            break
                if hit is None:
                    continue
                w = Fraction(1)
                for i in idx:
                    w *= weights[i]
                mass += w
                if best is None or hit.min_margin > best.min_margin:
                    best = hit
                if first_only:
                    return best, mass, scanned
        return best, mass, scanned

    for n, shapes in shapes_per_n.items():
        if not shapes or S == 0:
            continue
        ranges = _chunks(S, workers)
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                results = list(ex.map(lambda r: scan(n, shapes, r), ranges))
        else:
            results = [scan(n, shapes, r) for r in ranges]
        mass = Fraction(0)
        for best, m, scanned in results:
            report.tuples_scanned += scanned
            mass += m
            if best is not None:
                report.stable = False
                if report.certificate is None or best.min_margin > report.certificate.min_margin:
                    report.certificate = best
                if first_only:
                    return report
        if not first_only:
            report.blocked_mass[n] = mass
    return report


@dataclass
class McRow:
    n: int
    samples: int
    blocked: int
    frequency: float
    ci_low: float
    ci_high: float


@dataclass
class McReport:
    family: str
    n_max: int
    seed: int
    rows: list
    witness: Optional[object] = None

    @property
    def stable(self) -> bool:
        return all(r.blocked == 0 for r in self.rows)


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple:
    ci = binomtest(k, n).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def audit_stability_mc(o: Outcome, family: str = "pairwise", n_max: int = 2,
                       samples: int = 10_000, seed: int = 0, eps=DEFAULT_EPS,
                       contract_search=None, workers: int = 1,
                       chunk_size: int = 1000) -> McReport:
    """Estimate the blocked mass of i.i.d. samples from the outcome.

    Row ``n = 1`` samples single matched types for individual blocks; rows
    ``n >= 2`` sample n-tuples from the product measure.  Chunk ``c`` of row
    ``n`` draws from the seed sequence ``(seed, spawn_key=(n, c))`` so the
    report does not depend on ``workers``.
    """
    p = o.problem
    support = positive_mass_subtypes(o)
    subtypes = [s for s, _ in support]
    probs = np.array([float(w) for _, w in support])
    probs /= probs.sum()
    search = _BlockSearch(p, eps, contract_search)
    search.index(subtypes)
    verdicts: dict = {}

    def verdict(idx):
        if idx in verdicts:
            return verdicts[idx]
        if len(idx) == 1:
            res = is_individual_block(p, subtypes[idx[0]], eps)
            res = None if res is None else (subtypes[idx[0]], res[0], res[1])
        else:
            tup = tuple(subtypes[i] for i in idx)
            res = None
            for shape in shape_classes(family, n_max, len(idx), p.N):
                res = search.best(shape, tup, first_only=True, ids=idx)
                if res is not None:
                    break
        verdicts[idx] = res
        return res

    def run_chunk(n, c):
        size = min(chunk_size, samples - c * chunk_size)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n, c)))
        draws = rng.choice(len(subtypes), size=(size, n), p=probs)
        blocked, witness = 0, None
        for row in draws:
            res = verdict(tuple(int(i) for i in row))
            if res is not None:
                blocked += 1
                if witness is None:
                    witness = res
        return blocked, witness

    rows, witness = [], None
    sizes = [1] + [n for n in range(2, n_max + 1) if shape_classes(family, n_max, n, p.N)]
    n_chunks = math.ceil(samples / chunk_size)
    for n in sizes:
        jobs = list(range(n_chunks))
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                results = list(ex.map(lambda c: run_chunk(n, c), jobs))
        else:
            results = [run_chunk(n, c) for c in jobs]
        blocked = sum(b for b, _ in results)
        for _, w in results:
            if w is not None and witness is None:
                witness = w
        lo, hi = wilson_interval(blocked, samples)
        rows.append(McRow(n, samples, blocked, blocked / samples, lo, hi))
    return McReport(family, n_max, seed, rows, witness)


# ---------------------------------------------------------------------------
# openness

def perturbation_margin(p: MatchingProblem, c: BlockCertificate):
    """Radius within which moving every vertex keeps the block: margin / (2L)."""
    if not p.lipschitz:
        raise ValueError("problem has no declared Lipschitz constant")
    return Fraction(c.min_margin) / (2 * Fraction(p.lipschitz))


def perturbation_failures(p: MatchingProblem, c: BlockCertificate, radius, trials: int = 1000,
                          seed: int = 0, eps=DEFAULT_EPS) -> list:
    """Perturb each vertex within ``radius`` and re-test the block.

    Edge contracts follow the perturbed vertices: each edge takes the
    feasible contract nearest to its original one.  Returns the perturbed
    samples that stopped being blocks.
    """
    if p.perturb is None:
        raise ValueError("problem does not support perturbation")
    rng = np.random.default_rng(seed)
    failures = []
    for _ in range(trials):
        subs = tuple(MatchedType(*p.perturb(s.t, s.choice, radius, rng)) for s in c.vertex_subtypes)
        contracts = []
        for (k, l), y in zip(c.shape.edges, c.edge_contracts):
            options = p.pair_contracts(subs[k].t, subs[l].t)
            if not options:
                contracts = None
                break
            contracts.append(min(options, key=lambda z: (p.contract_space.dist(z, y), point_key(z))))
        if contracts is None or is_g_block(p, c.shape, subs, contracts, eps) is None:
            failures.append(subs)
    return failures


__all__ = [
    "BlockShape", "BlockCertificate", "PAIRWISE", "AuditReport", "AuditTooLarge", "McReport",
    "assemble_Z", "is_individual_block", "is_g_block", "enumerate_shapes", "shape_classes",
    "audit_stability", "audit_stability_mc", "perturbation_margin", "perturbation_failures",
    "wilson_interval", "EMPTY",
]
