"""The three retrieval metrics, from raw judgments and from a full pipeline.

A judgment is just the query's label next to the labels retrieval brought
back. mAP@k rewards early hits, mMV@k asks the top-k to vote, ACC@k only
asks whether the right label shows up at all.
"""

from cbmir import RelevanceJudgment, acc_at_k, ap_at_k, evaluate, map_at_k, mmv_at_k
from cbmir import make_clustered_sets

j = RelevanceJudgment(query_label=1, retrieved_labels=(1, 0, 1, 2, 0))
print(f"judgment: query label 1, retrieved {j.retrieved_labels}")
print(f"AP@5  = {ap_at_k(j, 5):.4f}   (hits at ranks 1 and 3)")

judgments = [
    j,
    RelevanceJudgment(1, (1, 1, 0, 0, 2)),  # tied vote, rank decides
    RelevanceJudgment(2, (0, 0, 0, 1, 1)),  # total miss
]
for k in (1, 3, 5):
    print(
        f"k={k}:  mAP={map_at_k(judgments, k):.4f}"
        f"  mMV={mmv_at_k(judgments, k):.4f}"
        f"  ACC={acc_at_k(judgments, k):.4f}"
    )

# The same numbers fall out of evaluate() on real feature sets.
database, queries = make_clustered_sets(classes=4, per_class=300, dim=64, sep=3.0, seed=1)
report = evaluate(queries, database)
print(f"\nsynthetic 4-class run over {report.query_count} queries:")
print(f"mAP@5 {report.map_at_5:.4f}  mMV@5 {report.mmv_at_5:.4f}")
print(f"ACC@1 {report.acc_at_1:.4f}  ACC@3 {report.acc_at_3:.4f}  ACC@5 {report.acc_at_5:.4f}")
print(f"build {report.timing.build_seconds * 1e3:.1f} ms, "
      f"test {report.timing.test_seconds * 1e3:.1f} ms")
