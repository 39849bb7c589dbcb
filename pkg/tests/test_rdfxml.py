import pytest
import rdflib
from hypothesis import given, settings, strategies as st

from placeorigin import rdfxml
from placeorigin.rdfxml import PrefixMap, Triple

DBR = "http://dbpedia.org/resource/"
DBO = "http://dbpedia.org/ontology/"
XSD = "http://www.w3.org/2001/XMLSchema#"


def as_rdflib(triples):
    out = set()
    for t in triples:
        if t.object_is_uri:
            o = rdflib.URIRef(t.object)
        else:
            o = rdflib.Literal(t.object, lang=t.object_lang,
                               datatype=rdflib.URIRef(t.datatype) if t.datatype else None)
        out.add((rdflib.URIRef(t.subject), rdflib.URIRef(t.predicate), o))
    return out


def parse_with_rdflib(doc):
    g = rdflib.Graph()
    g.parse(data=doc, format="xml")
    return set(g)


SAMPLE = [
    Triple(DBR + "John_Batman", DBO + "birthPlace", DBR + "Parramatta", object_is_uri=True),
    Triple(DBR + "John_Batman", "http://www.w3.org/2000/01/rdf-schema#label", "John Batman", "en"),
    Triple(DBR + "John_Batman", DBO + "birthDate", "1801-01-21", datatype=XSD + "date"),
    Triple(DBR + "Batman_(1989_film)", DBO + "abstract", 'Tim Burton\'s "Batman" & <more>', "en"),
    Triple(DBR + "Bourke,_New_South_Wales", "http://example.org/vocab/x-rated", "plain"),
    Triple("http://example.org/a#b", "http://example.org/p/1name", "needs a generated namespace"),
]


def test_roundtrip_own_and_independent_parser():
    doc = rdfxml.serialize(SAMPLE)
    assert set(rdfxml.parse(doc)) == set(SAMPLE)
    assert parse_with_rdflib(doc) == as_rdflib(SAMPLE)


def test_serialization_is_deterministic_and_sorted():
    doc = rdfxml.serialize(SAMPLE)
    assert rdfxml.serialize(list(reversed(SAMPLE))) == doc
    order = [doc.index(f'"&dbr;{s}"') for s in ("Batman_(1989_film)", "Bourke,_New_South_Wales", "John_Batman")]
    assert order == sorted(order)


def test_prefix_compaction():
    doc = rdfxml.serialize(SAMPLE)
    assert 'rdf:about="&dbr;John_Batman"' in doc
    assert "<dbo:birthPlace" in doc
    decl = rdfxml.namespace_declarations(doc)
    assert decl["dbr"] == DBR and decl["dbo"] == DBO
    # every declared prefix maps to a distinct namespace
    assert len(set(decl.values())) == len(decl)


def test_prefix_map_bijective():
    pm = PrefixMap()
    with pytest.raises(ValueError):
        pm.add("dbr", "http://other/")
    with pytest.raises(ValueError):
        pm.add("other", DBR)
    assert pm.compact(DBR + "X") == "dbr:X"
    assert pm.expand("dbr:X") == DBR + "X"


def test_empty_document():
    doc = rdfxml.serialize([])
    assert rdfxml.parse(doc) == []
    assert parse_with_rdflib(doc) == set()


def test_subject_fragments_are_substrings():
    doc = rdfxml.serialize(SAMPLE)
    frags = rdfxml.subject_fragments(SAMPLE)
    assert set(frags) == {t.subject for t in SAMPLE}
    for frag in frags.values():
        body = frag.strip().splitlines()
        assert all(line.strip() in doc for line in body)


local = st.text(st.characters(whitelist_categories=("Lu", "Ll", "Nd"), whitelist_characters="_-.()',"),
                min_size=1, max_size=12)
literal = st.text(st.characters(blacklist_categories=("Cs", "Cc"), whitelist_characters="\r\n\t"), max_size=30)
predicates = st.sampled_from([DBO + "abstract", DBO + "country", "http://www.w3.org/2000/01/rdf-schema#comment",
                              "http://example.org/v/p", "http://www.w3.org/2003/01/geo/wgs84_pos#lat"])


@st.composite
def triples(draw):
    s = DBR + draw(local)
    p = draw(predicates)
    kind = draw(st.sampled_from(["uri", "lang", "typed", "plain"]))
    if kind == "uri":
        return Triple(s, p, DBR + draw(local), object_is_uri=True)
    text = draw(literal)
    if kind == "lang":
        return Triple(s, p, text, draw(st.sampled_from(["en", "en-au", "fr"])))
    if kind == "typed":
        return Triple(s, p, text, datatype=XSD + "string")
    return Triple(s, p, text)


@settings(max_examples=150, deadline=None)
@given(st.lists(triples(), max_size=12))
def test_roundtrip_property(ts):
    doc = rdfxml.serialize(ts)
    assert set(rdfxml.parse(doc)) == set(ts)
    assert parse_with_rdflib(doc) == as_rdflib(ts)
