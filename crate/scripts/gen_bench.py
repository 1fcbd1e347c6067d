#!/usr/bin/env python3
"""Regenerates crates/core/data/bench: a 200-document / 20-query corpus where
every relevant document names its concept only through an ontology synonym.

Usage: python3 scripts/gen_bench.py
"""
import json
import os
import random

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "data", "bench")

# (id, label used in queries, synonym used in the relevant document, parent id)
CONCEPTS = [
    ("C01", "myocardial infarction", "heart attack", "P01"),
    ("C02", "cerebrovascular accident", "stroke", "P01"),
    ("C03", "pyrexia", "fever", "P02"),
    ("C04", "cephalalgia", "headache", "P03"),
    ("C05", "emesis", "vomiting", "P04"),
    ("C06", "pruritus", "itching", "P05"),
    ("C07", "dyspnea", "breathlessness", "P06"),
    ("C08", "syncope", "fainting", "P03"),
    ("C09", "epistaxis", "nosebleed", "P06"),
    ("C10", "alopecia", "baldness", "P05"),
    ("C11", "somnambulism", "sleepwalking", "P03"),
    ("C12", "myopia", "nearsightedness", "P07"),
    ("C13", "nephrolithiasis", "kidney stones", "P04"),
    ("C14", "otitis media", "ear infection", "P02"),
    ("C15", "varicella", "chickenpox", "P02"),
    ("C16", "pertussis", "whooping cough", "P02"),
    ("C17", "hypertension", "high blood pressure", "P01"),
    ("C18", "xerostomia", "dry mouth", "P04"),
    ("C19", "halitosis", "bad breath", "P04"),
    ("C20", "urticaria", "hives", "P05"),
]

PARENTS = [
    ("P01", "cardiovascular disease"),
    ("P02", "infectious disease"),
    ("P03", "neurological disorder"),
    ("P04", "digestive disorder"),
    ("P05", "dermatological condition"),
    ("P06", "respiratory disorder"),
    ("P07", "ophthalmic disorder"),
]

ASPECTS = [
    "recovery", "children", "elderly", "mortality", "dosage", "diet", "exercise",
    "sleep", "outcomes", "genetics", "pregnancy", "adolescents", "smoking",
    "vaccination", "obesity", "caffeine", "seasonal", "hospital", "rural", "screening",
]

VERBS = {
    "affect": ["influence", "alter"],
    "reduce": ["lower", "decrease"],
    "increase": ["raise", "elevate"],
    "predict": ["forecast", "anticipate"],
    "prevent": ["avert", "avoid"],
}

FILLER = [
    "We analysed a retrospective cohort drawn from regional registries.",
    "Statistical models adjusted for age, sex and baseline covariates.",
    "Confidence intervals were computed with bootstrap resampling.",
    "Limitations include self-reported measures and missing follow-up.",
    "Further prospective work is needed to confirm these observations.",
    "Participants were recruited over a period of three years.",
]


def main():
    rng = random.Random(20240611)
    os.makedirs(OUT, exist_ok=True)

    ontology = []
    for pid, label in PARENTS:
        kids = [c[0] for c in CONCEPTS if c[3] == pid]
        ontology.append({"id": pid, "label": label, "synonyms": [], "hypernyms": [], "hyponyms": kids})
    for cid, label, syn, parent in CONCEPTS:
        ontology.append({"id": cid, "label": label, "synonyms": [syn], "hypernyms": [parent], "hyponyms": []})

    docs, queries, qrels = [], [], []
    for qi, (cid, label, syn, _) in enumerate(CONCEPTS):
        aspects = rng.sample(ASPECTS, 2)
        verb = rng.choice(sorted(VERBS))
        qid = f"q{qi + 1:02d}"
        queries.append((qid, f"does {label} {verb} {aspects[0]} and {aspects[1]}"))
        doc_id = f"doc{qi * 10:03d}"
        qrels.append((qid, doc_id))
        syn_verb = rng.choice(VERBS[verb])
        docs.append({
            "id": doc_id,
            "title": f"Clinical course of {syn} in a cohort study",
            "abstract": f"We examine how {syn} may {syn_verb} patient trajectories. {syn.capitalize()} was assessed in detail.",
            "sections": [
                {"heading": "Background", "text": f"{syn.capitalize()} is a common presentation. " + rng.choice(FILLER)},
                {"heading": "Methods", "text": rng.choice(FILLER) + " " + rng.choice(FILLER)},
                {"heading": "Results", "text": f"Patients with {syn} showed differences related to {aspects[0]} and {aspects[1]}."},
                {"heading": "Discussion", "text": rng.choice(FILLER)},
            ],
            "metadata": {"kind": "relevant", "concept": cid},
        })
        # distractors: the same aspects, emphasised in the title, about other concepts
        others = [c for c in CONCEPTS if c[0] != cid]
        for j in range(1, 10):
            other = rng.choice(others)
            a0, a1 = aspects if j % 2 else (aspects[0], rng.choice(ASPECTS))
            docs.append({
                "id": f"doc{qi * 10 + j:03d}",
                "title": f"{a0.capitalize()} and {a1} in {other[2]} patients",
                "abstract": f"A study of {a0} and {a1} among people with {other[2]}. We {verb} nothing in particular.",
                "sections": [
                    {"heading": "Introduction", "text": f"{a0.capitalize()} matters. " + rng.choice(FILLER)},
                    {"heading": "Findings", "text": f"Effects on {a1} were modest. " + rng.choice(FILLER)},
                ],
                "metadata": {"kind": "distractor"},
            })

    with open(os.path.join(OUT, "corpus.jsonl"), "w") as f:
        for d in docs:
            f.write(json.dumps(d) + "\n")
    with open(os.path.join(OUT, "queries.tsv"), "w") as f:
        for qid, text in queries:
            f.write(f"{qid}\t{text}\n")
    with open(os.path.join(OUT, "qrels.tsv"), "w") as f:
        for qid, doc_id in qrels:
            f.write(f"{qid}\t{doc_id}\t1\n")
    with open(os.path.join(OUT, "ontology.jsonl"), "w") as f:
        for e in ontology:
            f.write(json.dumps(e) + "\n")
    with open(os.path.join(OUT, "verbs.tsv"), "w") as f:
        for verb in sorted(VERBS):
            f.write(f"{verb}\t{','.join(VERBS[verb])}\n")
    print(f"wrote {len(docs)} docs, {len(queries)} queries to {os.path.normpath(OUT)}")


if __name__ == "__main__":
    main()
