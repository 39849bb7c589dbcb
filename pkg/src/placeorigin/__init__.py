"""Place-name origin retrieval: gazetteer handling, spatial datasets, knowledge-graph search,
late-interaction ranking, generation prompting and evaluation."""
from .errors import PlaceOriginError
from .geo import (CityNode, CountryNode, SpatialGraph, build_city_graph, build_country_graph,
                  haversine_km, parse_city_table, parse_country_table)
from .generate import (Ordering, PromptCandidate, PromptSpec, assemble_prompt, call_generator,
                       parse_generation)
from .index import ClusteredIndex, TripleDocument, build_index, chunk_by_subject
from .metrics import MetricsReport, aggregate, hr_at_k, map_at_k, mrr_at_k, ndcg_at_k, precision_at_k
from .pairs import QAPair, gen_city_pairs, gen_country_pairs
from .pipeline import PipelineConfig, RunManifest, emit_report, run_pipeline
from .ranker import RankedCandidate, rank_top_k, score_maxsim
from .rdfxml import PrefixMap, Triple
from .search import KGSnapshot, RelationFilter, search_root
from .toponym import AnchorQuestion, GazetteerEntry, Toponym, build_anchor_question, extract_root, load_gazetteer

__version__ = "0.1.0"
