"""Random three-layer network: input -> recurrent E/I middle layer -> output.

Edges are grouped by class.  Indices are local to each population, so an
``EE`` edge ``(3, 7)`` runs from excitatory neuron 3 to excitatory neuron 7.
"""
from __future__ import annotations

import io
from dataclasses import asdict, dataclass, fields

import numpy as np

# (class, source population, target population)
EDGE_CLASSES = (
    ("in_E", "input", "E"),
    ("EE", "E", "E"),
    ("EI", "E", "I"),
    ("IE", "I", "E"),
    ("E_out", "E", "output"),
)


@dataclass(frozen=True)
class TopologyConfig:
    n_input: int = 100
    n_exc: int = 160
    n_inh: int = 40
    n_output: int = 1
    p_in: float = 0.1
    p_EE: float = 0.05
    p_EI: float = 0.02
    p_IE: float = 0.10
    p_II: float = 0.0
    W_max: float = 2.0
    W_EE_init: float = 1.0
    allow_self_loops: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("p_in", "p_EE", "p_EI", "p_IE", "p_II"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} = {p} is not a probability")
        if self.p_II != 0.0:
            raise ValueError("inhibitory neurons do not connect to each other (p_II must be 0)")
        for name in ("n_input", "n_exc", "n_inh", "n_output"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def size(self, population: str) -> int:
        return {"input": self.n_input, "E": self.n_exc, "I": self.n_inh,
                "output": self.n_output}[population]

    def probability(self, cls: str) -> float:
        return {"in_E": self.p_in, "EE": self.p_EE, "EI": self.p_EI,
                "IE": self.p_IE, "E_out": 1.0}[cls]


@dataclass(frozen=True)
class EdgeSet:
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    plastic: bool

    def __len__(self) -> int:
        return len(self.src)


@dataclass(frozen=True)
class Topology:
    config: TopologyConfig
    edges: dict[str, EdgeSet]

    def count(self, cls: str) -> int:
        return len(self.edges[cls])

    def equal(self, other: Topology) -> bool:
        if self.config != other.config:
            return False
        for cls, _, _ in EDGE_CLASSES:
            a, b = self.edges[cls], other.edges[cls]
            if not (np.array_equal(a.src, b.src) and np.array_equal(a.dst, b.dst)
                    and np.array_equal(a.weight, b.weight) and a.plastic == b.plastic):
                return False
        return True


def build_network(cfg: TopologyConfig) -> Topology:
    rng = np.random.default_rng(cfg.seed)
    edges = {}
    for cls, src_pop, dst_pop in EDGE_CLASSES:
        n_src, n_dst = cfg.size(src_pop), cfg.size(dst_pop)
        if cls == "E_out":
            mask = np.ones((n_src, n_dst), dtype=bool)
        else:
            mask = rng.random((n_src, n_dst)) < cfg.probability(cls)
        if cls == "EE" and not cfg.allow_self_loops:
            np.fill_diagonal(mask, False)
        src, dst = np.nonzero(mask)
        if cls == "EE":
            w = np.full(len(src), cfg.W_EE_init)
        elif cls == "E_out":
            w = np.zeros(len(src))
        else:
            # uniform on (0, W_max]
            w = cfg.W_max * (1.0 - rng.random(len(src)))
        edges[cls] = EdgeSet(src.astype(np.int64), dst.astype(np.int64), w, plastic=cls == "EE")
    return Topology(cfg, edges)


def degree_report(topo: Topology) -> dict:
    """In/out degree statistics per edge class plus isolated E neurons."""
    cfg = topo.config
    report = {}
    e_in = np.zeros(cfg.n_exc, dtype=np.int64)
    for cls, src_pop, dst_pop in EDGE_CLASSES:
        es = topo.edges[cls]
        indeg = np.bincount(es.dst, minlength=cfg.size(dst_pop))
        outdeg = np.bincount(es.src, minlength=cfg.size(src_pop))
        report[cls] = {
            "in": _stats(indeg),
            "out": _stats(outdeg),
        }
        if dst_pop == "E":
            e_in += indeg
    report["isolated_E"] = np.flatnonzero(e_in == 0).tolist()
    return report


def _stats(deg: np.ndarray) -> dict:
    if len(deg) == 0:
        return {"min": 0, "mean": 0.0, "max": 0}
    return {"min": int(deg.min()), "mean": float(deg.mean()), "max": int(deg.max())}


def crossbar(topo: Topology, weights: dict[str, np.ndarray] | None = None) -> np.ndarray:
    """Dense signed weight matrix of the middle layer.

    Rows are E then I neurons; columns are input neurons, then E, then I.
    Inactive crosspoints are zero.
    """
    cfg = topo.config
    n_mid = cfg.n_exc + cfg.n_inh
    M = np.zeros((n_mid, cfg.n_input + n_mid))
    offsets = {"input": 0, "E": cfg.n_input, "I": cfg.n_input + cfg.n_exc}
    rows = {"E": 0, "I": cfg.n_exc}
    for cls, src_pop, dst_pop in EDGE_CLASSES:
        if dst_pop == "output":
            continue
        es = topo.edges[cls]
        w = es.weight if weights is None or cls not in weights else weights[cls]
        sign = -1.0 if src_pop == "I" else 1.0
        M[rows[dst_pop] + es.dst, offsets[src_pop] + es.src] = sign * w
    return M


def dumps(topo: Topology) -> str:
    out = io.StringIO()
    header = " ".join(f"{k}={v}" for k, v in asdict(topo.config).items())
    out.write(f"# srnn-topology {header}\n")
    for cls, _, _ in EDGE_CLASSES:
        es = topo.edges[cls]
        p = int(es.plastic)
        for s, d, w in zip(es.src.tolist(), es.dst.tolist(), es.weight.tolist()):
            out.write(f"{cls} {s} {d} {w!r} {p}\n")
    return out.getvalue()


def loads(text: str) -> Topology:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# srnn-topology"):
        raise ValueError("missing '# srnn-topology' header")
    types = {f.name: f.type for f in fields(TopologyConfig)}
    kw = {}
    for item in lines[0].split()[2:]:
        key, _, value = item.partition("=")
        if key not in types:
            raise ValueError(f"unknown topology key {key!r}")
        kw[key] = _coerce(value, types[key])
    cfg = TopologyConfig(**kw)
    rows = {cls: ([], [], [], []) for cls, _, _ in EDGE_CLASSES}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 5 or parts[0] not in rows:
            raise ValueError(f"line {lineno}: malformed edge {line!r}")
        r = rows[parts[0]]
        r[0].append(int(parts[1]))
        r[1].append(int(parts[2]))
        r[2].append(float(parts[3]))
        r[3].append(parts[4] == "1")
    edges = {}
    for cls, _, _ in EDGE_CLASSES:
        s, d, w, p = rows[cls]
        edges[cls] = EdgeSet(np.array(s, dtype=np.int64), np.array(d, dtype=np.int64),
                             np.array(w, dtype=float), plastic=cls == "EE")
    return Topology(cfg, edges)


def _coerce(value: str, typ):
    typ = typ if isinstance(typ, str) else typ.__name__
    if typ == "bool":
        if value not in ("True", "False", "true", "false", "1", "0"):
            raise ValueError(f"not a boolean: {value!r}")
        return value in ("True", "true", "1")
    if typ == "int":
        return int(value)
    if typ == "float":
        return float(value)
    return value
