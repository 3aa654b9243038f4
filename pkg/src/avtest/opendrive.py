"""OpenDRIVE 1.4 output for composed road networks.

Straight segments become roads with a single ``line`` geometry and
``nlanes / 2`` driving lanes per side.  Each intersection becomes a
junction; every ordered pair of its connected ports gets a straight
connecting road, whose end points are computed from the already rounded
incident-road records so that re-read geometry stays continuous.

Numbers are written with 6 decimals, except headings (12 decimals): a
6-decimal heading would move the far end of a 200 m road by ~1e-4 m.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from .fsutil import write_text_atomic
from .scene import Intersection, RoadNetwork, StraightRoad, ValidationError, validate_network

REV_MAJOR, REV_MINOR = 1, 4


def _f(x: float) -> str:
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def _h(x: float) -> str:
    s = f"{x:.12f}"
    return "0.000000000000" if s == "-0.000000000000" else s


def _r6(x: float) -> float:
    return float(_f(x))


def _r12(x: float) -> float:
    return float(_h(x))


@dataclass
class Geometry:
    s: float
    x: float
    y: float
    hdg: float
    length: float

    def end(self) -> tuple[float, float]:
        return (self.x + self.length * math.cos(self.hdg), self.y + self.length * math.sin(self.hdg))


@dataclass
class Link:
    element_type: str  # road | junction
    element_id: str
    contact_point: str | None = None  # start | end (roads only)


@dataclass
class Road:
    id: str
    name: str
    junction: str  # "-1" for ordinary roads
    geometry: list[Geometry]
    lanes_left: int
    lanes_right: int
    lane_width: float
    predecessor: Link | None = None
    successor: Link | None = None

    @property
    def length(self) -> float:
        return _r6(sum(g.length for g in self.geometry))

    def start(self) -> tuple[float, float]:
        g = self.geometry[0]
        return (g.x, g.y)

    def end(self) -> tuple[float, float]:
        return self.geometry[-1].end()


@dataclass
class JunctionConnection:
    id: str
    incoming: str
    connecting: str
    contact_point: str
    lane_links: list[tuple[int, int]] = field(default_factory=list)


@dataclass
class Junction:
    id: str
    name: str
    connections: list[JunctionConnection] = field(default_factory=list)


@dataclass
class OpenDriveDocument:
    name: str
    roads: list[Road] = field(default_factory=list)
    junctions: list[Junction] = field(default_factory=list)

    def road(self, rid: str) -> Road:
        for r in self.roads:
            if r.id == rid:
                return r
        raise KeyError(rid)

    # -- writing ---------------------------------------------------------------

    def to_xml(self) -> str:
        root = ET.Element("OpenDRIVE")
        ET.SubElement(root, "header", {
            "revMajor": str(REV_MAJOR), "revMinor": str(REV_MINOR), "name": self.name,
            "version": "1.00", "north": "0.000000", "south": "0.000000",
            "east": "0.000000", "west": "0.000000",
        })
        for r in self.roads:
            el = ET.SubElement(root, "road", {"name": r.name, "length": _f(r.length), "id": r.id,
                                              "junction": r.junction})
            link = ET.SubElement(el, "link")
            for tag, lk in (("predecessor", r.predecessor), ("successor", r.successor)):
                if lk is None:
                    continue
                attrs = {"elementType": lk.element_type, "elementId": lk.element_id}
                if lk.contact_point:
                    attrs["contactPoint"] = lk.contact_point
                ET.SubElement(link, tag, attrs)
            pv = ET.SubElement(el, "planView")
            for g in r.geometry:
                ge = ET.SubElement(pv, "geometry", {"s": _f(g.s), "x": _f(g.x), "y": _f(g.y),
                                                    "hdg": _h(g.hdg), "length": _f(g.length)})
                ET.SubElement(ge, "line")
            lanes = ET.SubElement(el, "lanes")
            sec = ET.SubElement(lanes, "laneSection", {"s": "0.000000"})
            if r.lanes_left:
                left = ET.SubElement(sec, "left")
                for i in range(r.lanes_left, 0, -1):
                    self._lane(left, i, r.lane_width)
            center = ET.SubElement(sec, "center")
            ET.SubElement(center, "lane", {"id": "0", "type": "none", "level": "false"})
            if r.lanes_right:
                right = ET.SubElement(sec, "right")
                for i in range(1, r.lanes_right + 1):
                    self._lane(right, -i, r.lane_width)
        for j in self.junctions:
            je = ET.SubElement(root, "junction", {"name": j.name, "id": j.id})
            for c in j.connections:
                ce = ET.SubElement(je, "connection", {"id": c.id, "incomingRoad": c.incoming,
                                                      "connectingRoad": c.connecting,
                                                      "contactPoint": c.contact_point})
                for a, b in c.lane_links:
                    ET.SubElement(ce, "laneLink", {"from": str(a), "to": str(b)})
        ET.indent(root, space="  ")
        body = ET.tostring(root, encoding="unicode")
        return '<?xml version="1.0" encoding="UTF-8"?>\n' + body + "\n"

    @staticmethod
    def _lane(parent, lid: int, width: float):
        ln = ET.SubElement(parent, "lane", {"id": str(lid), "type": "driving", "level": "false"})
        ET.SubElement(ln, "link")
        ET.SubElement(ln, "width", {"sOffset": "0.000000", "a": _f(width), "b": "0.000000",
                                    "c": "0.000000", "d": "0.000000"})

    # -- reading ---------------------------------------------------------------

    @classmethod
    def from_xml(cls, text: str) -> "OpenDriveDocument":
        """Parse the subset this module writes."""
        root = ET.fromstring(text)
        if root.tag != "OpenDRIVE":
            raise ValueError("not an OpenDRIVE document")
        header = root.find("header")
        doc = cls(name=header.get("name", "") if header is not None else "")
        for el in root.findall("road"):
            geoms = [Geometry(float(g.get("s")), float(g.get("x")), float(g.get("y")),
                              float(g.get("hdg")), float(g.get("length")))
                     for g in el.find("planView").findall("geometry")]
            sec = el.find("lanes").find("laneSection")
            left = sec.find("left")
            right = sec.find("right")
            nl = len(left.findall("lane")) if left is not None else 0
            nr = len(right.findall("lane")) if right is not None else 0
            w = None
            for side in (left, right):
                if side is not None and side.find("lane") is not None:
                    w = float(side.find("lane").find("width").get("a"))
            links = {}
            lk = el.find("link")
            for tag in ("predecessor", "successor"):
                e = lk.find(tag) if lk is not None else None
                links[tag] = None if e is None else Link(e.get("elementType"), e.get("elementId"),
                                                         e.get("contactPoint"))
            doc.roads.append(Road(el.get("id"), el.get("name"), el.get("junction"), geoms, nl, nr,
                                  w or 0.0, links["predecessor"], links["successor"]))
        for je in root.findall("junction"):
            j = Junction(je.get("id"), je.get("name"))
            for ce in je.findall("connection"):
                j.connections.append(JunctionConnection(
                    ce.get("id"), ce.get("incomingRoad"), ce.get("connectingRoad"), ce.get("contactPoint"),
                    [(int(l.get("from")), int(l.get("to"))) for l in ce.findall("laneLink")]))
            doc.junctions.append(j)
        return doc

    # -- checks ----------------------------------------------------------------

    def structural_problems(self) -> list[str]:
        """Length sums, resolvable links and junction records."""
        out = []
        ids = {r.id for r in self.roads}
        jids = {j.id for j in self.junctions}
        for r in self.roads:
            total = sum(g.length for g in r.geometry)
            if abs(total - r.length) > 1e-6:
                out.append(f"road {r.id}: length {r.length} != geometry sum {total}")
            s = 0.0
            for g in r.geometry:
                if abs(g.s - s) > 1e-6:
                    out.append(f"road {r.id}: geometry s={g.s} expected {s}")
                s += g.length
            for lk in (r.predecessor, r.successor):
                if lk is None:
                    continue
                pool = ids if lk.element_type == "road" else jids
                if lk.element_id not in pool:
                    out.append(f"road {r.id}: link to missing {lk.element_type} {lk.element_id}")
        by_id = {r.id: r for r in self.roads}
        for j in self.junctions:
            for c in j.connections:
                for rid in (c.incoming, c.connecting):
                    if rid not in by_id:
                        out.append(f"junction {j.id}: connection {c.id} references missing road {rid}")
                if c.connecting in by_id and by_id[c.connecting].junction != j.id:
                    out.append(f"junction {j.id}: connecting road {c.connecting} not marked as in the junction")
                for a, b in c.lane_links:
                    inc, con = by_id.get(c.incoming), by_id.get(c.connecting)
                    if inc and not (-inc.lanes_right <= a <= inc.lanes_left and a != 0):
                        out.append(f"junction {j.id}: lane {a} missing on road {c.incoming}")
                    if con and not (-con.lanes_right <= b <= con.lanes_left and b != 0):
                        out.append(f"junction {j.id}: lane {b} missing on road {c.connecting}")
        return out

    def continuity_errors(self) -> list[float]:
        """Endpoint gaps for every junction connecting road and its neighbours."""
        by_id = {r.id: r for r in self.roads}
        gaps = []
        for r in self.roads:
            if r.junction == "-1":
                continue
            for lk, here in ((r.predecessor, r.start()), (r.successor, r.end())):
                if lk is None or lk.element_type != "road":
                    continue
                o = by_id[lk.element_id]
                there = o.start() if lk.contact_point == "start" else o.end()
                gaps.append(math.dist(here, there))
        return gaps


def build_document(net: RoadNetwork, name: str = "network") -> OpenDriveDocument:
    """OpenDRIVE model of a validated network (no file I/O)."""
    bad = validate_network(net)
    if bad:
        raise ValidationError("network is invalid: " + "; ".join(bad), bad)
    doc = OpenDriveDocument(name=name)
    straights = [e for e in net.elements.values() if isinstance(e, StraightRoad)]
    crosses = [e for e in net.elements.values() if isinstance(e, Intersection)]
    rid = {e.id: str(i + 1) for i, e in enumerate(straights)}
    jid = {e.id: str(1000 + i) for i, e in enumerate(crosses)}
    neighbour: dict[tuple[str, str], tuple[str, str]] = {}
    for c in net.connections:
        neighbour[(c.parent, c.parent_port)] = (c.child, c.child_port)
        neighbour[(c.child, c.child_port)] = (c.parent, c.parent_port)

    def link_for(el: StraightRoad, port: str) -> Link | None:
        other = neighbour.get((el.id, port))
        if other is None:
            return None
        oid, oport = other
        if oid in jid:
            return Link("junction", jid[oid])
        return Link("road", rid[oid], "start" if oport == "ONE" else "end")

    for e in straights:
        w = e.world
        geom = Geometry(0.0, _r6(w.x), _r6(w.y), _r12(w.heading), _r6(e.length))
        doc.roads.append(Road(rid[e.id], e.id, "-1", [geom], e.nlanes // 2, e.nlanes // 2, e.lane_width,
                              link_for(e, "ONE"), link_for(e, "TWO")))
    next_id = len(straights) + 1
    for x in crosses:
        j = Junction(jid[x.id], x.id)
        attached = []
        for p in x.local_ports():
            other = neighbour.get((x.id, p))
            if other is not None and other[0] in rid:
                attached.append((p, other))
        for (pa, (ra, ea)), (pb, (rb, eb)) in ((a, b) for a in attached for b in attached if a[0] != b[0]):
            inc, out = doc.road(rid[ra]), doc.road(rid[rb])
            ca = "start" if ea == "ONE" else "end"
            cb = "start" if eb == "ONE" else "end"
            p0 = inc.start() if ca == "start" else inc.end()
            p1 = out.start() if cb == "start" else out.end()
            x0, y0, x1, y1 = _r6(p0[0]), _r6(p0[1]), _r6(p1[0]), _r6(p1[1])
            hdg = _r12(math.atan2(y1 - y0, x1 - x0))
            length = _r6(math.hypot(x1 - x0, y1 - y0))
            cid = str(next_id)
            next_id += 1
            n = x.nlanes // 2
            doc.roads.append(Road(cid, f"{x.id}:{pa}->{pb}", j.id, [Geometry(0.0, x0, y0, hdg, length)], n, n,
                                  x.lane_width, Link("road", inc.id, ca), Link("road", out.id, cb)))
            # lanes driving into the junction: right lanes at an end contact, left at a start
            incoming_lanes = [-k for k in range(1, n + 1)] if ca == "end" else list(range(1, n + 1))
            j.connections.append(JunctionConnection(str(len(j.connections)), inc.id, cid, "start",
                                                    [(a, -abs(a)) for a in incoming_lanes]))
        doc.junctions.append(j)
    return doc


def export_network(net: RoadNetwork, path: str | Path, name: str | None = None) -> Path:
    """Write ``net`` as an OpenDRIVE file; invalid networks are refused."""
    path = Path(path)
    doc = build_document(net, name or path.stem)
    write_text_atomic(path, doc.to_xml())
    return path
