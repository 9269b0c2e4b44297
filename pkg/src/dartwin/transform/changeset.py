"""Change sets between two model versions and the structural diff."""

from __future__ import annotations

from dataclasses import dataclass

from .. import model as m

_KINDS = ("added", "removed", "modified")


@dataclass(frozen=True)
class ChangeSet:
    added: tuple[str, ...] = ()
    removed: tuple[str, ...] = ()
    modified: tuple[str, ...] = ()

    def __post_init__(self):
        for kind in _KINDS:
            object.__setattr__(self, kind, tuple(sorted(set(getattr(self, kind)))))
        a, r, mo = set(self.added), set(self.removed), set(self.modified)
        if a & r or a & mo or r & mo:
            raise ValueError(f"change set lists overlap: {sorted((a & r) | (a & mo) | (r & mo))}")

    def __bool__(self) -> bool:
        return bool(self.added or self.removed or self.modified)

    @property
    def highlighted(self) -> frozenset[str]:
        """Ids a diagram should mark: additions and modifications."""
        return frozenset(self.added) | frozenset(self.modified)

    def to_text(self) -> str:
        lines = [f"{kind} {eid}" for kind in _KINDS for eid in getattr(self, kind)]
        return "".join(line + "\n" for line in sorted(lines))

    @classmethod
    def from_text(cls, text: str) -> "ChangeSet":
        buckets: dict[str, list[str]] = {k: [] for k in _KINDS}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            kind, _, eid = line.partition(" ")
            if kind not in buckets or not eid.strip():
                raise ValueError(f"line {n}: expected 'added|removed|modified <id>', got {raw!r}")
            buckets[kind].append(eid.strip())
        return cls(**{k: tuple(v) for k, v in buckets.items()})

    def summary(self) -> str:
        return f"{len(self.added)} added, {len(self.removed)} removed, {len(self.modified)} modified"


def _incident(model: m.Model) -> dict[m.PortRef, tuple[str, ...]]:
    out: dict[m.PortRef, set[str]] = {}
    for f in model.flows():
        out.setdefault(f.src, set()).add(f.id)
        out.setdefault(f.dst, set()).add(f.id)
    return {k: tuple(sorted(v)) for k, v in out.items()}


def fingerprints(model: m.Model) -> dict[str, tuple]:
    """Per-element tuple of owned fields and incident flows.

    Two versions of an element with equal fingerprints are unchanged.
    """
    incident = _incident(model)
    fp: dict[str, tuple] = {}
    for eid, el, container in model.iter_elements():
        if isinstance(el, m.TwinSystem):
            fp[eid] = (
                "system",
                el.kind.value,
                el.name,
                container,
                tuple(p.id for p in el.ports),
                tuple(d.id for d in el.dts),
                tuple(s.id for s in el.subsystems),
                tuple(f.id for f in el.flows),
            )
        elif isinstance(el, m.Dt):
            flows = sorted({f for p in el.ports for f in incident.get(p.ref, ())})
            fp[eid] = ("dt", el.name, container, el.behavior_key, tuple(p.id for p in el.ports), tuple(flows))
        elif isinstance(el, m.Port):
            fp[eid] = ("port", el.owner, el.name, el.direction.value, el.role.value, el.unit, incident.get(el.ref, ()))
        elif isinstance(el, m.Goal):
            text = el.constraint.to_text() if el.constraint is not None else None
            fp[eid] = ("goal", el.title, tuple(p.name for p in el.pois), text)
        elif isinstance(el, m.Poi):
            fp[eid] = ("poi", el.goal, el.name, el.unit)
        elif isinstance(el, m.GoalEdge):
            combinator = el.combinator.value if el.combinator else None
            fp[eid] = ("edge", el.kind.value, el.source, el.target, el.label, combinator)
        elif isinstance(el, m.Flow):
            fp[eid] = ("flow", el.src.id, el.dst.id, container)
        elif isinstance(el, m.DtGoalLink):
            fp[eid] = ("link", el.dt, el.goal)
    return fp


def diff(source: m.Model, result: m.Model) -> ChangeSet:
    before, after = fingerprints(source), fingerprints(result)
    return ChangeSet(
        added=tuple(k for k in after if k not in before),
        removed=tuple(k for k in before if k not in after),
        modified=tuple(k for k in after if k in before and before[k] != after[k]),
    )

