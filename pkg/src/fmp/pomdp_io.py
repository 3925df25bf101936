"""Reader and writer for a subset of Cassandra's `.pomdp` text format.

Supported statements::

    discount: <f>
    values: reward
    states: <n> | <name> ...        (likewise actions:, observations:)
    start: ...                      (accepted, ignored)
    T: <a> : <s> : <s'> <p>         T: <a> : <s> <row>      T: <a> <matrix|identity|uniform>
    O: <a> : <s'> : <o> <p>         O: <a> : <s'> <row>     O: <a> <matrix|uniform>
    R: <a> : <s> : * : * <r>

``*`` is a wildcard wherever an identifier is expected. Row and matrix data
may continue on the following lines. The action in ``O:`` statements is
accepted but observations are modelled as Z(o | s'); two statements giving
different values for the same (s', o) under different explicit actions are
rejected. Later statements override earlier ones.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from typing import IO

import numpy as np

from .errors import PomdpRangeError, PomdpSemanticError, PomdpSyntaxError
from .model import ROW_TOL, PomdpModel, RewardScaling

_STATEMENT = re.compile(r"^\s*([A-Za-z]+)\s*:(.*)$")
_DATA_WORDS = {"uniform", "identity"}


@dataclass
class _Statement:
    lineno: int
    keyword: str
    text: str
    data: list  # (token, lineno) pairs from continuation lines


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _split_statements(lines) -> list[_Statement]:
    out: list[_Statement] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _STATEMENT.match(line)
        if m:
            out.append(_Statement(lineno, m.group(1), m.group(2).strip(), []))
            continue
        toks = line.split()
        if out and all(_is_number(t) or t in _DATA_WORDS for t in toks):
            out[-1].data.extend((t, lineno) for t in toks)
            continue
        raise PomdpSyntaxError(f"cannot parse {raw.strip()!r}", lineno)
    return out


class _Space:
    def __init__(self, kind: str, spec: str, lineno: int):
        toks = spec.split()
        if not toks:
            raise PomdpSyntaxError(f"{kind}: needs a count or a list of names", lineno)
        if len(toks) == 1 and toks[0].isdigit():
            self.size = int(toks[0])
            self.names: dict[str, int] = {}
        else:
            if len(set(toks)) != len(toks):
                raise PomdpSemanticError(f"duplicate {kind} names", lineno)
            self.size = len(toks)
            self.names = {t: i for i, t in enumerate(toks)}
        if self.size < 1:
            raise PomdpSemanticError(f"{kind}: must declare at least one element", lineno)
        self.kind = kind

    def resolve(self, tok: str, lineno: int) -> list[int]:
        if tok == "*":
            return list(range(self.size))
        if tok in self.names:
            return [self.names[tok]]
        if tok.isdigit():
            i = int(tok)
            if i >= self.size:
                raise PomdpSemanticError(f"{self.kind} index {i} out of range (size {self.size})", lineno)
            return [i]
        raise PomdpSemanticError(f"undeclared {self.kind} identifier {tok!r}", lineno)


def _numbers(toks: list[tuple[str, int]], count: int, what: str, lineno: int) -> np.ndarray:
    if len(toks) != count:
        raise PomdpSyntaxError(f"{what}: expected {count} numbers, found {len(toks)}", lineno)
    vals = []
    for t, ln in toks:
        if not _is_number(t):
            raise PomdpSyntaxError(f"{what}: {t!r} is not a number", ln)
        vals.append(float(t))
    return np.array(vals)


def _fields(st: _Statement, n_ids: int):
    """Split ``a : s : x tail...`` into identifier tokens and trailing data."""
    parts = [p.strip() for p in st.text.split(":")]
    if len(parts) > n_ids:
        raise PomdpSyntaxError(f"too many ':' separated fields in {st.keyword}: statement", st.lineno)
    *head, last = parts
    last_toks = last.split()
    if not last_toks or any(not p or len(p.split()) != 1 for p in head):
        raise PomdpSyntaxError(f"malformed {st.keyword}: statement", st.lineno)
    ids = head + [last_toks[0]]
    data = [(t, st.lineno) for t in last_toks[1:]] + st.data
    return ids, data


def load_pomdp_text(source: str | IO[str], *, reward_max: float | None = None,
                    normalize: bool = False) -> PomdpModel:
    """Parse ``.pomdp`` text into a validated :class:`PomdpModel`.

    Rewards must lie in ``[0, reward_max]`` unless ``normalize`` is set and the
    file declares ``values: reward``, in which case they are affinely mapped
    onto ``[0, reward_max]`` (default 1) and the map is kept on the model.
    ``reward_max`` defaults to the largest reward in the file.
    """
    text = source if isinstance(source, str) else source.read()
    statements = _split_statements(io.StringIO(text))

    discount = None
    discount_line = None
    values_declared = False
    spaces: dict[str, _Space] = {}
    T = Z = R = None
    t_lines = z_lines = None
    z_owner: dict[tuple[int, int], tuple[int, float]] = {}
    r_lines: dict[tuple[int, int], int] = {}

    def need(*kinds):
        for k in kinds:
            if k not in spaces:
                raise PomdpSemanticError(f"{k}: must be declared before use", st.lineno)

    for st in statements:
        kw = st.keyword
        if kw in ("states", "actions", "observations"):
            if st.data:
                raise PomdpSyntaxError(f"{kw}: names must be on one line", st.data[0][1])
            spaces[kw] = _Space(kw, st.text, st.lineno)
            if all(k in spaces for k in ("states", "actions", "observations")):
                S, A, O = (spaces[k].size for k in ("states", "actions", "observations"))
                T = np.zeros((A, S, S))
                Z = np.zeros((S, O))
                R = np.zeros((S, A))
                t_lines = np.zeros((A, S), dtype=int)
                z_lines = np.zeros(S, dtype=int)
        elif kw == "discount":
            toks = st.text.split() + [t for t, _ in st.data]
            if len(toks) != 1 or not _is_number(toks[0]):
                raise PomdpSyntaxError("discount: expects one number", st.lineno)
            discount = float(toks[0])
            discount_line = st.lineno
        elif kw == "values":
            if st.text.split() != ["reward"]:
                raise PomdpSemanticError("only 'values: reward' is supported", st.lineno)
            values_declared = True
        elif kw == "start":
            continue
        elif kw == "T":
            need("states", "actions", "observations")
            sp_a, sp_s = spaces["actions"], spaces["states"]
            S = sp_s.size
            ids, data = _fields(st, 3)
            acts = sp_a.resolve(ids[0], st.lineno)
            if len(ids) == 1:
                words = [t for t, _ in data]
                if words == ["identity"]:
                    block = np.eye(S)
                elif words == ["uniform"]:
                    block = np.full((S, S), 1.0 / S)
                else:
                    block = _numbers(data, S * S, "T matrix", st.lineno).reshape(S, S)
                for a in acts:
                    T[a] = block
                    t_lines[a, :] = st.lineno
            elif len(ids) == 2:
                srcs = sp_s.resolve(ids[1], st.lineno)
                if [t for t, _ in data] == ["uniform"]:
                    row = np.full(S, 1.0 / S)
                else:
                    row = _numbers(data, S, "T row", st.lineno)
                for a in acts:
                    for s in srcs:
                        T[a, s] = row
                        t_lines[a, s] = st.lineno
            else:
                srcs = sp_s.resolve(ids[1], st.lineno)
                dsts = sp_s.resolve(ids[2], st.lineno)
                p = _numbers(data, 1, "T entry", st.lineno)[0]
                for a in acts:
                    for s in srcs:
                        T[a, s, dsts] = p
                        t_lines[a, s] = st.lineno
        elif kw == "O":
            need("states", "actions", "observations")
            sp_s, sp_o = spaces["states"], spaces["observations"]
            S, O = sp_s.size, sp_o.size
            ids, data = _fields(st, 3)
            spaces["actions"].resolve(ids[0], st.lineno)
            explicit = ids[0] != "*"
            if len(ids) == 1:
                if [t for t, _ in data] == ["uniform"]:
                    block = np.full((S, O), 1.0 / O)
                else:
                    block = _numbers(data, S * O, "O matrix", st.lineno).reshape(S, O)
                cells = [(s, o, block[s, o]) for s in range(S) for o in range(O)]
            elif len(ids) == 2:
                if [t for t, _ in data] == ["uniform"]:
                    row = np.full(O, 1.0 / O)
                else:
                    row = _numbers(data, O, "O row", st.lineno)
                cells = [(s, o, row[o]) for s in sp_s.resolve(ids[1], st.lineno) for o in range(O)]
            else:
                p = _numbers(data, 1, "O entry", st.lineno)[0]
                cells = [(s, o, p) for s in sp_s.resolve(ids[1], st.lineno)
                         for o in sp_o.resolve(ids[2], st.lineno)]
            for s, o, p in cells:
                if explicit:
                    prev = z_owner.get((s, o))
                    if prev is not None and prev[0] != ids[0] and prev[1] != p:
                        raise PomdpSemanticError(
                            f"O({o}|{s}) differs between actions {prev[0]} and {ids[0]}; "
                            "observations must not depend on the action", st.lineno)
                    z_owner[(s, o)] = (ids[0], p)
                Z[s, o] = p
                z_lines[s] = st.lineno
        elif kw == "R":
            need("states", "actions", "observations")
            ids, data = _fields(st, 4)
            if len(ids) != 4 or ids[2] != "*" or ids[3] != "*":
                raise PomdpSyntaxError("only 'R: <a> : <s> : * : * <r>' reward statements are supported",
                                       st.lineno)
            r = _numbers(data, 1, "R entry", st.lineno)[0]
            for a in spaces["actions"].resolve(ids[0], st.lineno):
                for s in spaces["states"].resolve(ids[1], st.lineno):
                    R[s, a] = r
                    r_lines[(s, a)] = st.lineno
        else:
            raise PomdpSyntaxError(f"unknown statement {kw!r}", st.lineno)

    if T is None:
        raise PomdpSemanticError("states:, actions: and observations: must all be declared")
    if discount is None:
        raise PomdpSemanticError("missing discount:")
    if not 0.0 <= discount < 1.0:
        raise PomdpSemanticError(f"discount {discount} not in [0, 1)", discount_line)

    for a, s in np.ndindex(T.shape[:2]):
        row = T[a, s]
        if np.any(row < 0) or abs(row.sum() - 1.0) > ROW_TOL:
            raise PomdpSemanticError(f"T row (a={a}, s={s}) sums to {float(row.sum())!r}",
                                     int(t_lines[a, s]) or None)
    for s in range(Z.shape[0]):
        row = Z[s]
        if np.any(row < 0) or abs(row.sum() - 1.0) > ROW_TOL:
            raise PomdpSemanticError(f"O row (s'={s}) sums to {float(row.sum())!r}", int(z_lines[s]) or None)

    scaling = RewardScaling()
    lo, hi = float(R.min()), float(R.max())
    if normalize:
        if not values_declared:
            raise PomdpSemanticError("reward normalization requires a 'values: reward' header")
        target = 1.0 if reward_max is None else float(reward_max)
        scale = (hi - lo) / target if hi > lo else 1.0
        scaling = RewardScaling(scale=scale, shift=lo)
        R = np.clip((R - lo) / scale, 0.0, target)
        rmax = target
    else:
        rmax = float(reward_max) if reward_max is not None else (hi if hi > 0 else 1.0)
        bad = np.argwhere((R < 0) | (R > rmax))
        if len(bad):
            s, a = (int(x) for x in bad[0])
            raise PomdpRangeError(f"reward R(s={s}, a={a})={float(R[s, a])!r} outside [0, {rmax}]",
                                  r_lines.get((s, a)))
    return PomdpModel(T, Z, R, rmax, discount, scaling)


def load_pomdp_file(path, **kwargs) -> PomdpModel:
    with open(path) as fh:
        return load_pomdp_text(fh, **kwargs)


def dump_pomdp_text(model: PomdpModel) -> str:
    """Canonical text form; ``load_pomdp_text(dump_pomdp_text(m)) == m`` bitwise."""
    out = [
        f"discount: {model.discount!r}",
        "values: reward",
        f"states: {model.num_states}",
        f"actions: {model.num_actions}",
        f"observations: {model.num_observations}",
        "",
    ]
    for a in range(model.num_actions):
        out.append(f"T: {a}")
        out.extend(" ".join(repr(float(p)) for p in row) for row in model.transition[a])
        out.append("")
    out.append("O: *")
    out.extend(" ".join(repr(float(p)) for p in row) for row in model.observation)
    out.append("")
    for s in range(model.num_states):
        for a in range(model.num_actions):
            out.append(f"R: {a} : {s} : * : * {float(model.expected_reward[s, a])!r}")
    return "\n".join(out) + "\n"
