"""Independent NDCG@10 / Recall@50 / MAP@50 computation for a TREC run.

Used to produce the golden metrics report under fixtures/toy/expected:

    python python/metrics_oracle.py RUN QRELS > metrics.json
"""

import json
import math
import sys
from collections import defaultdict


def read_run(path):
    run = defaultdict(list)
    order = []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            qid, _, doc, rank, _score, _tag = line.split()
            if qid not in run:
                order.append(qid)
            run[qid].append((int(rank), doc))
    return {q: [d for _, d in sorted(run[q])] for q in order}


def read_qrels(path):
    qrels = defaultdict(dict)
    with open(path) as f:
        for i, line in enumerate(f):
            cols = line.split()
            if not cols:
                continue
            if i == 0 and not cols[-1].lstrip("-").isdigit():
                continue
            qid, doc, grade = (cols[0], cols[1], cols[2]) if len(cols) == 3 else (cols[0], cols[2], cols[3])
            qrels[qid][doc] = max(int(grade), 0)
    return qrels


def ndcg(ranking, grades, k=10):
    ideal = sorted((g for g in grades.values() if g > 0), reverse=True)
    if not ideal:
        return None
    dcg = sum(grades.get(d, 0) / math.log2(i + 2) for i, d in enumerate(ranking[:k]))
    idcg = sum(g / math.log2(i + 2) for i, g in enumerate(ideal[:k]))
    return dcg / idcg


def recall(ranking, grades, k=50):
    rel = {d for d, g in grades.items() if g > 0}
    if not rel:
        return None
    return len(rel.intersection(ranking[:k])) / len(rel)


def average_precision(ranking, grades, k=50):
    total = sum(1 for g in grades.values() if g > 0)
    if total == 0:
        return None
    hits, acc = 0, 0.0
    for i, d in enumerate(ranking[:k]):
        if grades.get(d, 0) > 0:
            hits += 1
            acc += hits / (i + 1)
    return acc / total


def main(run_path, qrels_path):
    run, qrels = read_run(run_path), read_qrels(qrels_path)
    per_query, skipped = {}, []
    for qid, ranking in run.items():
        grades = qrels.get(qid, {})
        m = (ndcg(ranking, grades), recall(ranking, grades), average_precision(ranking, grades))
        if None in m:
            skipped.append(qid)
        else:
            per_query[qid] = {"ndcg@10": m[0], "recall@50": m[1], "map@50": m[2]}
    ids = sorted(per_query)
    n = len(ids)
    mean = {}
    for key in ("ndcg@10", "recall@50", "map@50"):
        acc = 0.0
        for q in ids:
            acc += per_query[q][key]
        mean[key] = acc / n
    report = {
        "mean": mean,
        "query_count": n,
        "skipped_count": len(skipped),
        "skipped": sorted(skipped),
        "per_query": {q: per_query[q] for q in ids},
    }
    sys.stdout.write(json.dumps(report, indent=2) + "\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
