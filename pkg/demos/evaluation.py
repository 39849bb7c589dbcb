"""Ranking metrics on a toy judged list, then searcher accounting over a 248-query record set.

Run from the repository root:  python demos/evaluation.py
"""
from pathlib import Path

from placeorigin import metrics

META = Path(__file__).resolve().parent.parent / "tests" / "data" / "eval" / "table3_meta.ndjson"


def main():
    rels = [0, 1, 0, 0, 1, 0, 0, 0, 0, 0]
    print(f"relevance at ranks 1..10: {rels}")
    for k in (1, 3, 10):
        print(f"  k={k:<2} HR {metrics.hr_at_k(rels, k)}  MRR {metrics.mrr_at_k(rels, k):.3f}  "
              f"nDCG {metrics.ndcg_at_k(rels, k):.3f}  P {metrics.precision_at_k(rels, k):.3f}")

    acc = metrics.accounting(metrics.read_meta(META.read_text().splitlines()))
    print(f"\n{acc['n']} toponyms, {acc['extracted']} with a non-empty graph, "
          f"{acc['mentioned']} whose graph mentions the origin")
    print(f"  extracted ratio {acc['extracted_ratio']:.3f}, searcher hit ratio {acc['hr_searcher']:.3f}")

    series = {"searcher": 1.0, "ranker": 0.58, "generator": 0.61}
    print("\nrelative hit-ratio change between modules:",
          {k: round(v, 3) for k, v in metrics.delta_hr_series(series).items()})


if __name__ == "__main__":
    main()
