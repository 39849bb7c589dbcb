"""Triples and a prefix-compacted RDF/XML writer/reader.

URIs in attribute position are written through internal DTD entities
(``rdf:about="&dbr;John_Batman"``) and predicates as qualified element
names, so every URI in the document appears in prefixed form.
"""
from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
XML_NS = "http://www.w3.org/XML/1998/namespace"

DEFAULT_PREFIXES = {
    "rdf": RDF_NS,
    "rdfs": "http://www.w3.org/2000/01/rdf-schema#",
    "xsd": "http://www.w3.org/2001/XMLSchema#",
    "owl": "http://www.w3.org/2002/07/owl#",
    "dbo": "http://dbpedia.org/ontology/",
    "dbp": "http://dbpedia.org/property/",
    "dbr": "http://dbpedia.org/resource/",
    "geo": "http://www.w3.org/2003/01/geo/wgs84_pos#",
    "georss": "http://www.georss.org/georss/",
    "foaf": "http://xmlns.com/foaf/0.1/",
    "dct": "http://purl.org/dc/terms/",
    "prov": "http://www.w3.org/ns/prov#",
}

_NCNAME_START = r"A-Za-z_À-ÖØ-öø-˿Ͱ-ͽͿ-῿‌-‍⁰-↏Ⰰ-⿯、-퟿豈-﷏ﷰ-�"
_NCNAME_CHAR = _NCNAME_START + r"\-.0-9·̀-ͯ‿-⁀"
_NCNAME_SUFFIX = re.compile(f"[{_NCNAME_START}][{_NCNAME_CHAR}]*$")
_NCNAME = re.compile(f"^[{_NCNAME_START}][{_NCNAME_CHAR}]*$")
_XML_INVALID = re.compile("[\x00-\x08\x0b\x0c\x0e-\x1f￾￿]")


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: str
    object_lang: str | None = None
    object_is_uri: bool = False
    datatype: str | None = None

    def __post_init__(self):
        if self.object_is_uri and (self.object_lang or self.datatype):
            raise ValueError("URI objects carry neither language nor datatype")

    def sort_key(self):
        return (self.subject, self.predicate, not self.object_is_uri, self.object,
                self.object_lang or "", self.datatype or "")


def sort_triples(triples: Iterable[Triple]) -> list[Triple]:
    return sorted(set(triples), key=Triple.sort_key)


class PrefixMap:
    """Bijective prefix -> namespace map."""

    def __init__(self, mapping: Mapping[str, str] | None = None):
        self._ns: dict[str, str] = {}
        self._prefix: dict[str, str] = {}
        for p, ns in (DEFAULT_PREFIXES if mapping is None else mapping).items():
            self.add(p, ns)

    def add(self, prefix: str, namespace: str) -> None:
        if not _NCNAME.match(prefix):
            raise ValueError(f"invalid prefix {prefix!r}")
        if self._ns.get(prefix, namespace) != namespace or self._prefix.get(namespace, prefix) != prefix:
            raise ValueError(f"prefix map must stay bijective ({prefix!r} -> {namespace!r})")
        self._ns[prefix] = namespace
        self._prefix[namespace] = prefix

    def items(self):
        return sorted(self._ns.items())

    def __contains__(self, prefix):
        return prefix in self._ns

    def namespace(self, prefix: str) -> str:
        return self._ns[prefix]

    def copy(self) -> "PrefixMap":
        return PrefixMap(dict(self._ns))

    def split(self, uri: str, element: bool = False) -> tuple[str, str] | None:
        """Longest declared namespace that prefixes ``uri``; for element names the remainder must be an NCName."""
        best = None
        for ns, p in self._prefix.items():
            if uri.startswith(ns) and (best is None or len(ns) > len(best[1])):
                local = uri[len(ns):]
                if element and not _NCNAME.match(local):
                    continue
                best = (p, ns)
        if best is None:
            return None
        return best[0], uri[len(best[1]):]

    def compact(self, uri: str) -> str:
        hit = self.split(uri)
        return f"{hit[0]}:{hit[1]}" if hit else uri

    def expand(self, curie: str) -> str:
        p, _, local = curie.partition(":")
        return self._ns[p] + local if p in self._ns else curie


def _guess_namespace(uri: str, element: bool) -> str:
    if element:
        m = _NCNAME_SUFFIX.search(uri)
        if m is None or m.start() == 0:
            raise ValueError(f"predicate {uri!r} cannot be written as an XML element name")
        cut = m.start()
        # prefer cutting at a '/' or '#' if the remainder is still a valid name
        for sep in ("#", "/"):
            k = uri.rfind(sep)
            if k + 1 >= cut and _NCNAME.match(uri[k + 1:] or "-"):
                cut = k + 1
                break
        return uri[:cut]
    k = max(uri.rfind("#"), uri.rfind("/"))
    return uri[: k + 1] if k > 0 else uri


def _complete(pm: PrefixMap, triples: Sequence[Triple]) -> PrefixMap:
    pm = pm.copy()
    missing = set()
    for t in triples:
        if pm.split(t.predicate, element=True) is None:
            missing.add(_guess_namespace(t.predicate, True))
        for u in (t.subject, t.object if t.object_is_uri else None, t.datatype):
            if u and pm.split(u) is None:
                missing.add(_guess_namespace(u, False))
    n = 0
    for ns in sorted(missing):
        n += 1
        while f"ns{n}" in pm:
            n += 1
        pm.add(f"ns{n}", ns)
    return pm


def _text(s: str) -> str:
    s = _XML_INVALID.sub("�", s)
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace("\r", "&#13;")


def _attr_uri(pm: PrefixMap, uri: str) -> str:
    p, local = pm.split(uri)
    local = _text(local).replace('"', "&quot;")
    return f"&{p};{local}"


def _group_by_subject(triples: Sequence[Triple]) -> dict[str, list[Triple]]:
    groups: dict[str, list[Triple]] = {}
    for t in sort_triples(triples):
        groups.setdefault(t.subject, []).append(t)
    return groups


def _description(pm: PrefixMap, subject: str, triples: Sequence[Triple], indent: str = "  ") -> str:
    lines = [f'{indent}<rdf:Description rdf:about="{_attr_uri(pm, subject)}">']
    for t in triples:
        p, local = pm.split(t.predicate, element=True)
        name = f"{p}:{local}"
        if t.object_is_uri:
            lines.append(f'{indent}  <{name} rdf:resource="{_attr_uri(pm, t.object)}"/>')
            continue
        attrs = ""
        if t.object_lang:
            attrs += f' xml:lang="{t.object_lang}"'
        if t.datatype:
            attrs += f' rdf:datatype="{_attr_uri(pm, t.datatype)}"'
        lines.append(f"{indent}  <{name}{attrs}>{_text(t.object)}</{name}>")
    lines.append(f"{indent}</rdf:Description>")
    return "\n".join(lines)


def _used_prefixes(pm: PrefixMap, triples: Sequence[Triple]) -> tuple[set[str], set[str]]:
    elements, entities = {"rdf"}, set()
    for t in triples:
        elements.add(pm.split(t.predicate, element=True)[0])
        entities.add(pm.split(t.subject)[0])
        if t.object_is_uri:
            entities.add(pm.split(t.object)[0])
        if t.datatype:
            entities.add(pm.split(t.datatype)[0])
    return elements, entities


def serialize(triples: Sequence[Triple], pm: PrefixMap | None = None) -> str:
    """Deterministic RDF/XML: subjects sorted, then predicates, then objects."""
    pm = _complete(pm or PrefixMap(), triples)
    elements, entities = _used_prefixes(pm, triples)
    out = ['<?xml version="1.0" encoding="utf-8"?>']
    if entities:
        out.append("<!DOCTYPE rdf:RDF [")
        for p in sorted(entities):
            # entity text is re-parsed on expansion, hence the doubled escapes
            ns = (pm.namespace(p).replace("&", "&#38;#38;").replace("<", "&#38;#60;")
                  .replace("%", "&#37;").replace('"', "&#34;"))
            out.append(f'  <!ENTITY {p} "{ns}">')
        out.append("]>")
    decls = " ".join(f'xmlns:{p}="{_text(pm.namespace(p)).replace(chr(34), "&quot;")}"'
                     for p in sorted(elements))
    groups = _group_by_subject(triples)
    if not groups:
        out.append(f"<rdf:RDF {decls}/>")
        return "\n".join(out) + "\n"
    out.append(f"<rdf:RDF {decls}>")
    for subject, ts in groups.items():
        out.append(_description(pm, subject, ts))
    out.append("</rdf:RDF>")
    return "\n".join(out) + "\n"


def subject_fragments(triples: Sequence[Triple], pm: PrefixMap | None = None) -> dict[str, str]:
    """``rdf:Description`` element text per subject, as it appears inside :func:`serialize`."""
    pm = _complete(pm or PrefixMap(), triples)
    return {s: _description(pm, s, ts, indent="") for s, ts in _group_by_subject(triples).items()}


def namespace_declarations(document: str) -> dict[str, str]:
    """Prefix -> namespace pairs declared by a document (entities and xmlns)."""
    decl = dict(re.findall(r'<!ENTITY\s+([\w.-]+)\s+"([^"]*)"', document))
    decl.update(re.findall(r'xmlns:([\w.-]+)="([^"]*)"', document))
    return decl


def parse(document: str | bytes) -> list[Triple]:
    """Read the RDF/XML subset written by :func:`serialize` (plus typed node elements)."""
    root = ET.fromstring(document.encode("utf-8") if isinstance(document, str) else document)
    rdf = "{%s}" % RDF_NS
    if root.tag != rdf + "RDF":
        raise ValueError(f"not an RDF/XML document (root {root.tag})")
    out = []
    for node in root:
        subject = node.get(rdf + "about")
        if subject is None:
            raise ValueError("only rdf:about subjects are supported")
        if node.tag != rdf + "Description":
            out.append(Triple(subject, RDF_NS + "type", _tag_uri(node.tag), object_is_uri=True))
        for prop in node:
            pred = _tag_uri(prop.tag)
            res = prop.get(rdf + "resource")
            if res is not None:
                out.append(Triple(subject, pred, res, object_is_uri=True))
            else:
                out.append(Triple(subject, pred, prop.text or "",
                                  object_lang=prop.get("{%s}lang" % XML_NS),
                                  datatype=prop.get(rdf + "datatype")))
    return out


def _tag_uri(tag: str) -> str:
    ns, _, local = tag[1:].partition("}")
    return ns + local
