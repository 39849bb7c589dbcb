import re

import pytest
from hypothesis import given, settings, strategies as st

from placeorigin.errors import BudgetUnsatisfiable, ContextOverflow
from placeorigin.generate import (IN_CONTEXT_EXAMPLE, Ordering, PromptCandidate, PromptSpec, assemble_prompt,
                                  call_generator, count_tokens, parse_generation, prompt_body, render_completion)
from placeorigin.http import RetryPolicy
from placeorigin.ranker import RankedCandidate
from placeorigin.testing import ScriptedGenerator, answer_from_subject

Q = ("Who is Batman Avenue most likely named after, in Melbourne, Australia? "
     "If it is not a person, find any other origin.")


def cand(rank, name, text=None):
    return PromptCandidate(RankedCandidate(f"http://dbpedia.org/resource/{name}", 1.0 / rank, rank),
                           f"dbr:{name}", text or f"<rdf:Description>{name} facts</rdf:Description>")


def headers(text):
    return re.findall(r"^\[([^\]\n]+)\]$", text, re.M)


def test_prompt_layout():
    spec = PromptSpec(Q, (cand(1, "John_Batman"), cand(2, "Batman"), cand(3, "Batman_Park")))
    p = assemble_prompt(spec)
    assert headers(p.text) == ["dbr:Batman_Park", "dbr:Batman", "dbr:John_Batman"]
    assert p.text.startswith("For 3 knowledge graphs, an extract from the RDF/XML file is provided")
    assert f'We want to find an answer to: "{Q}"' in p.text
    assert "<CHOICE> </CHOICE>" in p.text and "<ANSWER> </ANSWER>" in p.text
    assert p.text.endswith(IN_CONTEXT_EXAMPLE)
    assert p.token_count == count_tokens(p.text) and p.dropped_ranks == ()
    body = prompt_body(p.text)
    assert body.index("[dbr:Batman_Park]") < body.index("[dbr:John_Batman]")


def test_head_best_ordering():
    spec = PromptSpec(Q, (cand(2, "Batman"), cand(1, "John_Batman")), Ordering.HEAD_BEST)
    assert headers(assemble_prompt(spec).text) == ["dbr:John_Batman", "dbr:Batman"]


def test_budget_drops_least_relevant_whole_extracts():
    long = "word " * 300
    spec = PromptSpec(Q, tuple(cand(r, f"S{r}", long) for r in range(1, 6)), token_budget=1000)
    p = assemble_prompt(spec)
    assert p.token_count <= 1000
    assert p.included_ranks == (1, 2) and p.dropped_ranks == (5, 4, 3)
    assert "[dbr:S1]" in p.text and "[dbr:S3]" not in p.text


def test_budget_unsatisfiable():
    with pytest.raises(BudgetUnsatisfiable):
        assemble_prompt(PromptSpec(Q, (cand(1, "S1", "word " * 500),), token_budget=200))
    with pytest.raises(ValueError):
        assemble_prompt(PromptSpec(Q, ()))


def test_parse_generation_variants():
    names = ["dbr:John_Batman", "dbr:Batman"]
    ok = parse_generation(render_completion("dbr:John_Batman", "John Batman"), names)
    assert (ok.choice_subject, ok.answer_text, ok.refusal, ok.off_list) == ("dbr:John_Batman", "John Batman", False, False)
    bracketed = parse_generation("<choice>[dbr:batman]</choice><ANSWER>Batman</ANSWER>", names)
    assert bracketed.choice_subject == "dbr:Batman"
    off = parse_generation("<CHOICE> dbr:Robin </CHOICE> <ANSWER> Robin </ANSWER>", names)
    assert off.off_list and off.choice_subject == "dbr:Robin"
    refusal = parse_generation("There is no relevant information to answer the question.", names)
    assert refusal.refusal and refusal.choice_subject is None and refusal.answer_text is None
    junk = parse_generation("<CHOICE>unterminated <ANSWER></ANSWER>", names)
    assert junk.choice_subject is None and junk.answer_text is None
    assert parse_generation(None).raw == ""


@settings(max_examples=200)
@given(st.text(min_size=1).filter(lambda s: "</" not in s and s.strip() and "<" not in s),
       st.text(min_size=1).filter(lambda s: "</" not in s and s.strip() and "<" not in s))
def test_parse_roundtrip_property(choice, answer):
    out = parse_generation(render_completion(choice, answer))
    assert out.choice_subject == choice.strip() and out.answer_text == answer.strip()


def test_scripted_generator_and_client():
    spec = PromptSpec(Q, (cand(1, "John_Batman"), cand(2, "Batman")))
    prompt = assemble_prompt(spec)
    with ScriptedGenerator() as gen:
        raw = call_generator(gen.url, prompt.text, policy=RetryPolicy(backoff_s=0))
        assert gen.prompts == [prompt.text]
    out = parse_generation(raw, ["dbr:John_Batman", "dbr:Batman"])
    assert out.choice_subject == "dbr:John_Batman" and out.answer_text == "John Batman"


def test_context_overflow():
    with ScriptedGenerator(context_limit=5) as gen:
        with pytest.raises(ContextOverflow):
            call_generator(gen.url, "one two three four five six seven", policy=RetryPolicy(backoff_s=0))


@pytest.mark.parametrize("name, answer", [("dbr:John_Batman", "John Batman"),
                                          ("dbr:Batman_(1989_film)", "Batman"),
                                          ("http://dbpedia.org/resource/Richard_Bourke", "Richard Bourke")])
def test_answer_from_subject(name, answer):
    assert answer_from_subject(name) == answer
