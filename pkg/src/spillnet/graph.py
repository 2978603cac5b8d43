"""Spillover networks and their measures.

A :class:`SpilloverNetwork` holds normalised transfer entropy weights
``weights[i, j]`` for the flow ``i -> j`` together with bootstrap p-values.
Every measure can be taken on the unfiltered weights or on the filtered
view, where insignificant edges are zeroed.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConditioningError, ConvergenceError, DataError


@dataclass(frozen=True)
class SpilloverNetwork:
    """Weighted directed network over ``labels``.

    Attributes:
        labels: vertex names.
        weights: ``(n, n)`` normalised transfer entropy, zero diagonal.
        significant: ``(n, n)`` bool mask, ``p < alpha``.
        alpha: significance level used for the mask.
        te: raw transfer entropy in bits (optional).
        pvalues: bootstrap p-values, NaN where not estimated (optional).
        window: ``(start_date, end_date)`` or None.
        excluded: labels left out of estimation (e.g. constant in window).
        boot_mean: mean bootstrap transfer entropy per pair (optional).
    """

    labels: tuple
    weights: np.ndarray
    significant: np.ndarray
    alpha: float = 0.10
    te: np.ndarray | None = None
    pvalues: np.ndarray | None = None
    window: tuple | None = None
    excluded: tuple = ()
    boot_mean: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        n = len(self.labels)
        for name in ("weights", "significant", "te", "pvalues", "boot_mean"):
            a = getattr(self, name)
            if a is None:
                continue
            a = np.array(a, dtype=bool if name == "significant" else float)
            if a.shape != (n, n):
                raise DataError(f"{name} has shape {a.shape}, expected {(n, n)}")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        w = self.weights
        if np.any(np.diag(w) != 0):
            raise DataError("weights must have a zero diagonal")
        if np.any(w < 0) or np.any(w > 1):
            raise DataError("weights must lie in [0, 1]")

    @property
    def n(self):
        return len(self.labels)

    def view(self, filtered=True):
        """Weight matrix, with insignificant edges zeroed when ``filtered``."""
        if filtered:
            return np.where(self.significant, self.weights, 0.0)
        return np.array(self.weights)

    def edge_set(self, filtered=True):
        """Unweighted edges ``(src, dst)``: significant ones, or all positive ones."""
        m = self.significant if filtered else self.weights > 0
        return {(self.labels[i], self.labels[j]) for i, j in zip(*np.nonzero(m)) if i != j}

    def n_edges(self, filtered=True):
        return len(self.edge_set(filtered))

    def to_dict(self):
        n = self.n
        edges = []
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                p = None if self.pvalues is None or math.isnan(self.pvalues[i, j]) else float(self.pvalues[i, j])
                e = {
                    "src": self.labels[i],
                    "dst": self.labels[j],
                    "te": None if self.te is None else float(self.te[i, j]),
                    "te_norm": float(self.weights[i, j]),
                    "p": p,
                    "significant": bool(self.significant[i, j]),
                }
                if self.boot_mean is not None:
                    e["te_boot_mean"] = float(self.boot_mean[i, j])
                edges.append(e)
        window = None
        if self.window is not None:
            window = {"start": str(self.window[0]), "end": str(self.window[1])}
        return {
            "labels": list(self.labels),
            "alpha": self.alpha,
            "window": window,
            "excluded": list(self.excluded),
            "edges": edges,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d):
        labels = d["labels"]
        pos = {t: i for i, t in enumerate(labels)}
        n = len(labels)
        w = np.zeros((n, n))
        te = np.zeros((n, n))
        pv = np.full((n, n), np.nan)
        sig = np.zeros((n, n), bool)
        bm = None
        for e in d["edges"]:
            i, j = pos[e["src"]], pos[e["dst"]]
            w[i, j] = e["te_norm"]
            te[i, j] = e["te"] if e.get("te") is not None else 0.0
            pv[i, j] = np.nan if e.get("p") is None else e["p"]
            sig[i, j] = e["significant"]
            if "te_boot_mean" in e:
                if bm is None:
                    bm = np.zeros((n, n))
                bm[i, j] = e["te_boot_mean"]
        if all(e.get("te") is None for e in d["edges"]):
            te = None
        win = d.get("window")
        window = None if win is None else (win["start"], win["end"])
        return cls(labels, w, sig, d.get("alpha", 0.10), te, pv, window, tuple(d.get("excluded", ())), bm)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def build_network(te_norm, pvalues, alpha=0.10, labels=None, te=None, window=None,
                  excluded=(), boot_mean=None):
    """Network with significance mask ``pvalues < alpha`` (NaN is never significant)."""
    w = np.asarray(te_norm, dtype=float)
    p = np.asarray(pvalues, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or p.shape != w.shape:
        raise DataError(f"need matching square matrices, got {w.shape} and {p.shape}")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    n = w.shape[0]
    labels = tuple(labels) if labels is not None else tuple(f"v{i}" for i in range(n))
    with np.errstate(invalid="ignore"):
        mask = p < alpha
    np.fill_diagonal(mask, False)
    return SpilloverNetwork(labels, w, mask, alpha, te, p, window, tuple(excluded), boot_mean)


def density(net, filtered=True):
    """Total weight over ``n (n - 1)``."""
    if net.n < 2:
        raise DataError("density needs at least 2 vertices")
    return float(net.view(filtered).sum() / (net.n * (net.n - 1)))


def weighted_degrees(net, filtered=True):
    """``(in_degree, out_degree)``: column sums and row sums of the weights."""
    w = net.view(filtered)
    return w.sum(axis=0), w.sum(axis=1)


def _transition(w):
    n = w.shape[0]
    out = w.sum(axis=1)
    dangling = out <= 0
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(dangling[:, None], 1.0 / n, w / out[:, None])
    return p


def pagerank(net, f=0.85, tol=1e-10, max_iter=1000, filtered=True, direction="in"):
    """Weighted PageRank by power iteration.

    With ``direction="in"`` a vertex scores by the rank flowing into it:
    ``PR_i = (1 - f)/n + f * sum_j w_ji / out_j * PR_j``.  With
    ``direction="out"`` the same recursion runs on the reversed graph, so a
    vertex scores by the importance of the vertices it sends to.  Vertices
    without outgoing weight spread their rank uniformly.  Stops when the L1
    change falls below ``tol``.

    Raises:
        ConvergenceError: after ``max_iter`` iterations; ``.last`` has the
            final iterate.
    """
    if direction not in ("in", "out"):
        raise ValueError("direction must be 'in' or 'out'")
    w = net.view(filtered) if isinstance(net, SpilloverNetwork) else np.asarray(net, dtype=float)
    if direction == "out":
        w = w.T
    n = w.shape[0]
    if n == 0:
        raise DataError("empty network")
    pt = _transition(w).T
    pr = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        new = (1 - f) / n + f * (pt @ pr)
        new /= new.sum()
        delta = np.abs(new - pr).sum()
        pr = new
        if delta < tol:
            return pr
    raise ConvergenceError(f"PageRank did not converge in {max_iter} iterations", last=pr)


@dataclass(frozen=True)
class Arborescence:
    """Spanning arborescence rooted at ``root``.

    ``parent`` maps each non-root label to ``(parent_label, weight)``.
    ``paths`` lists root-to-leaf label sequences; ``path_steps`` and
    ``path_weights`` give each path's edge count and weight sum.
    """

    root: str
    parent: dict
    total_weight: float
    paths: tuple
    path_steps: tuple
    path_weights: tuple

    @property
    def edges(self):
        return [(p, v, w) for v, (p, w) in self.parent.items()]

    def max_path(self):
        return self.paths[int(np.argmax(self.path_weights))] if self.paths else (self.root,)

    def min_path(self):
        return self.paths[int(np.argmin(self.path_weights))] if self.paths else (self.root,)

    def to_dict(self):
        return {
            "root": self.root,
            "total_weight": self.total_weight,
            "edges": [{"src": p, "dst": v, "weight": w} for p, v, w in self.edges],
            "paths": [
                {"vertices": list(p), "steps": s, "total_weight": w}
                for p, s, w in zip(self.paths, self.path_steps, self.path_weights)
            ],
        }


def _edmonds(nodes, edges, root):
    """Maximum arborescence by Chu-Liu/Edmonds contraction.

    ``edges`` maps ``(u, v)`` to weight.  Returns ``{v: u}`` for every
    non-root node, or None if some node has no incoming edge.
    """
    best = {}
    for (u, v), w in edges.items():
        if v == root or u == v:
            continue
        if v not in best or w > edges[(best[v], v)] or (w == edges[(best[v], v)] and u < best[v]):
            best[v] = u
    if any(v not in best for v in nodes if v != root):
        return None

    # look for a cycle among the chosen edges
    cycle = None
    colour = {}
    for start in nodes:
        if start in colour:
            continue
        path = []
        v = start
        while v not in colour and v != root and v in best:
            colour[v] = start
            path.append(v)
            v = best[v]
        if v in colour and colour[v] == start and v != root:
            cycle = path[path.index(v):]
            break
    if cycle is None:
        return best

    cyc = set(cycle)
    new = max(nodes) + 1
    in_cyc = {v: edges[(best[v], v)] for v in cyc}
    sub_edges = {}
    origin = {}
    for (u, v), w in edges.items():
        if u in cyc and v in cyc:
            continue
        if v in cyc:
            key, w2 = (u, new), w - in_cyc[v]
        elif u in cyc:
            key, w2 = (new, v), w
        else:
            key, w2 = (u, v), w
        if key not in sub_edges or w2 > sub_edges[key]:
            sub_edges[key] = w2
            origin[key] = (u, v)
    sub_nodes = [v for v in nodes if v not in cyc] + [new]
    sub = _edmonds(sub_nodes, sub_edges, root)
    if sub is None:
        return None

    result = {}
    for v, u in sub.items():
        ou, ov = origin[(u, v)]
        result[ov] = ou
    entered = origin[(sub[new], new)][1]
    for v in cyc:
        if v != entered:
            result[v] = best[v]
    return result


def choose_root(net, filtered=False):
    """Vertex with the largest weighted out-degree; ties go to the smallest label."""
    _, out = weighted_degrees(net, filtered)
    top = out.max()
    return min(lab for lab, d in zip(net.labels, out) if d == top)


def max_spanning_arborescence(net, root=None, filtered=False):
    """Maximum-weight spanning arborescence over positive-weight edges.

    The root defaults to :func:`choose_root`.

    Raises:
        DataError: some vertices cannot be reached from the root; the
            message names them.
    """
    w = net.view(filtered)
    labels = net.labels
    if root is None:
        root = choose_root(net, filtered)
    r = labels.index(root)
    n = net.n
    edges = {(i, j): float(w[i, j]) for i in range(n) for j in range(n) if i != j and w[i, j] > 0}

    reach = {r}
    frontier = [r]
    while frontier:
        u = frontier.pop()
        for j in range(n):
            if (u, j) in edges and j not in reach:
                reach.add(j)
                frontier.append(j)
    if len(reach) < n:
        missing = [labels[j] for j in range(n) if j not in reach]
        raise DataError(f"vertices unreachable from root {root}: {', '.join(missing)}")

    par = _edmonds(list(range(n)), edges, r) if n > 1 else {}
    parent = {labels[v]: (labels[u], edges[(u, v)]) for v, u in sorted(par.items())}
    total = float(sum(edges[(u, v)] for v, u in par.items()))

    children = {}
    for v, u in sorted(par.items()):
        children.setdefault(u, []).append(v)
    paths, steps, weights = [], [], []
    stack = [(r, (r,), 0.0)]
    while stack:
        v, p, acc = stack.pop()
        kids = children.get(v, [])
        if not kids and v != r:
            paths.append(tuple(labels[x] for x in p))
            steps.append(len(p) - 1)
            weights.append(acc)
        for c in reversed(kids):
            stack.append((c, p + (c,), acc + edges[(v, c)]))
    return Arborescence(root, parent, total, tuple(paths), tuple(steps), tuple(weights))


def jaccard(a, b, filtered=True):
    """``|A & B| / |A | B|`` of the two edge sets; 1 when both are empty."""
    if tuple(a.labels) != tuple(b.labels):
        raise DataError("networks have different vertex labels")
    ea, eb = a.edge_set(filtered), b.edge_set(filtered)
    union = ea | eb
    if not union:
        return 1.0
    return len(ea & eb) / len(union)


@dataclass(frozen=True)
class PowerSum:
    """Result of :func:`power_sum`.

    ``matrix`` is ``W + W^2 + ...`` when the series converges, else None.
    """

    converged: bool
    spectral_radius: float
    matrix: np.ndarray | None = None
    truncation_error: float | None = None


def spectral_radius(w, tol=1e-12, max_iter=10_000):
    """Largest eigenvalue modulus.

    For non-negative matrices this uses power iteration on ``I + W`` with
    Collatz-Wielandt bounds ``min_i (Wx)_i / x_i <= rho <= max_i (Wx)_i / x_i``;
    it returns ``(rho, lower, upper)``.  Other matrices, or iterations whose
    bounds do not close, fall back to a dense eigenvalue solve.
    """
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    if n == 0:
        return 0.0, 0.0, 0.0
    if np.all(w >= 0):
        x = np.ones(n) / n
        lo, hi = 0.0, math.inf
        for _ in range(max_iter):
            y = w @ x
            r = y / x
            lo, hi = max(lo, r.min()), min(hi, r.max())
            if hi - lo <= tol * max(1.0, hi):
                return 0.5 * (lo + hi), lo, hi
            x = x + y
            x /= x.sum()
            if x.min() <= 0:
                break
        rho = float(np.abs(np.linalg.eigvals(w)).max())
        return rho, min(lo, rho), max(min(hi, math.inf), rho)
    rho = float(np.abs(np.linalg.eigvals(w)).max())
    return rho, rho, rho


def power_sum(net, tol=1e-10, max_terms=1_000_000, filtered=True, max_cond=1e12):
    """Sum ``W + W^2 + W^3 + ...`` when the spectral radius is below 1.

    The closed form ``(I - W)^{-1} W`` is cross-checked against the
    truncated series, summed until a term's largest entry drops below
    ``tol`` or ``max_terms`` terms.

    Raises:
        ConditioningError: ``I - W`` is too ill-conditioned.
    """
    w = net.view(filtered) if isinstance(net, SpilloverNetwork) else np.asarray(net, dtype=float)
    n = w.shape[0]
    rho, lo, hi = spectral_radius(w)
    if not (hi < 1 or (lo < 1 and rho < 1)):
        return PowerSum(False, rho)
    a = np.eye(n) - w
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > max_cond:
        raise ConditioningError(f"I - W has condition number {cond:.3g}")
    closed = np.linalg.solve(a, w)

    total = np.zeros_like(w)
    term = w.copy()
    for _ in range(max_terms):
        total += term
        if np.abs(term).max() < tol:
            break
        term = term @ w
    err = float(np.abs(total - closed).max())
    closed.setflags(write=False)
    return PowerSum(True, rho, closed, err)


def top_influencers(net, k=5, filtered=True, f=0.85, pagerank_direction="out"):
    """Top ``k`` vertices by PageRank, in-degree and out-degree.

    Returns ``{"pagerank": [...], "in_degree": [...], "out_degree": [...]}``
    where each list holds ``(label, score)`` in descending score order, ties
    broken by label.  The PageRank list uses ``pagerank_direction`` (see
    :func:`pagerank`).
    """
    if k > net.n:
        raise ValueError(f"k={k} exceeds the {net.n} vertices")
    ind, outd = weighted_degrees(net, filtered)
    pr = pagerank(net, f=f, filtered=filtered, direction=pagerank_direction)

    def rank(scores):
        order = sorted(range(net.n), key=lambda i: (-scores[i], net.labels[i]))
        return [(net.labels[i], float(scores[i])) for i in order[:k]]

    return {"pagerank": rank(pr), "in_degree": rank(ind), "out_degree": rank(outd)}


def _dot_id(s):
    return '"' + str(s).replace('"', '\\"') + '"'


def network_to_dot(net, filtered=True, name="spillover"):
    """Graphviz digraph with weight-labelled edges."""
    w = net.view(filtered)
    lines = [f"digraph {_dot_id(name)} {{"]
    for lab in net.labels:
        lines.append(f"  {_dot_id(lab)};")
    for i, j in zip(*np.nonzero(w > 0)):
        lines.append(
            f"  {_dot_id(net.labels[i])} -> {_dot_id(net.labels[j])} "
            f'[weight={w[i, j]!r}, label="{w[i, j]:.4f}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def arborescence_to_dot(arb, name="msa"):
    """Graphviz tree; the heaviest path is red and the lightest orange."""
    hi, lo = arb.max_path(), arb.min_path()
    hi_edges = set(zip(hi, hi[1:]))
    lo_edges = set(zip(lo, lo[1:])) - hi_edges
    lines = [f"digraph {_dot_id(name)} {{", f"  {_dot_id(arb.root)} [shape=doublecircle];"]
    for p, v, w in arb.edges:
        attrs = [f"weight={w!r}", f'label="{w:.4f}"']
        if (p, v) in hi_edges:
            attrs += ["color=red", 'path="max"']
        elif (p, v) in lo_edges:
            attrs += ["color=orange", 'path="min"']
        lines.append(f"  {_dot_id(p)} -> {_dot_id(v)} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
