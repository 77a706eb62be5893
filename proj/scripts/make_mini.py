#!/usr/bin/env python3
"""Regenerates data/mini: a small synthetic corpus in upstream field names,
precomputed embeddings, a scripted mock provider and the pipeline config.

Also renders goldens/p1_ring.txt and goldens/p2_ring.txt from the template
files in goldens/, using a renderer written here rather than the library.

Output is deterministic; rerunning leaves the tree unchanged.
"""

import json
import math
import random
import statistics
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
MINI = ROOT / "data" / "mini"
GOLD = ROOT / "goldens"

# homonym -> (sentence template, [(meaning, setup, ending), (meaning, setup, ending)])
HOMONYMS = {
    "bank": ("{name} walked along the bank before sunset.", [
        ("a financial institution", "had an appointment about a loan",
         "The teller stamped the deposit slip and handed back a receipt."),
        ("sloping land beside a river", "loved fishing in the early evening",
         "The water lapped at the mud near the reeds."),
    ]),
    "bat": ("{name} picked up the bat from the shed.", [
        ("a club used to hit a ball", "was getting ready for the weekend game",
         "The pitcher waved from the mound as the inning began."),
        ("a nocturnal flying mammal", "volunteered at the wildlife rescue",
         "Its tiny wings trembled as it was placed in a warm box."),
    ]),
    "pitch": ("{name} thought hard about the pitch.", [
        ("a sales presentation", "was preparing for a meeting with investors",
         "The investors asked for a second meeting the next week."),
        ("the field where a match is played", "was the groundskeeper at the stadium",
         "The grass would need mowing before the match on Saturday."),
    ]),
    "bark": ("{name} noticed the bark was unusual.", [
        ("the outer covering of a tree", "was hiking through an old forest",
         "The trunk was covered in moss and deep grooves."),
        ("the sound a dog makes", "had just adopted a puppy from the shelter",
         "The puppy wagged its tail and barked again at the door."),
    ]),
    "spring": ("{name} could not stop thinking about the spring.", [
        ("the season after winter", "was tired of the long cold months",
         "The tulips finally opened in the garden."),
        ("a coiled piece of metal", "was repairing an old mattress",
         "The metal coil snapped back into place with a twang."),
    ]),
    "match": ("{name} looked for the match in the drawer.", [
        ("a stick that makes a flame when struck", "wanted to light the candles for dinner",
         "The candle flickered to life on the table."),
        ("a sports contest", "kept the ticket stubs from every game",
         "The final score was still written on the old program."),
    ]),
    "seal": ("{name} checked the seal carefully.", [
        ("a marine mammal", "worked at the aquarium on weekends",
         "It barked happily and slid back into the pool."),
        ("a device that closes something tightly", "was canning vegetables from the garden",
         "The lid popped down, airtight and secure."),
    ]),
    "crane": ("{name} stared at the crane for a long time.", [
        ("a tall wading bird", "spent mornings birdwatching by the marsh",
         "It spread its wings and lifted off the water."),
        ("a machine for lifting heavy loads", "worked on a downtown construction site",
         "The steel beam swung slowly toward the tenth floor."),
    ]),
    "mole": ("{name} found out about the mole that afternoon.", [
        ("a small burrowing animal", "was annoyed at the holes in the lawn",
         "Fresh mounds of dirt appeared along the fence."),
        ("a spy inside an organization", "had been suspicious of a coworker for weeks",
         "The secret files had been copied to an unknown drive."),
    ]),
    "pen": ("{name} went back for the pen.", [
        ("a writing instrument", "had to sign the lease that afternoon",
         "The ink was still wet on the signature line."),
        ("an enclosure for animals", "took care of the goats on the farm",
         "The gate latch had come loose again overnight."),
    ]),
}

FILLERS = [
    "The week had been long",
    "Everyone in town seemed busy",
    "The weather had turned mild",
    "It was a quiet Tuesday",
    "Nobody expected much to happen",
    "The radio played softly in the background",
]

NAMES = [
    "Abel", "Bruno", "Carmen", "Dario", "Elke", "Farah", "Gideon", "Hana", "Ivo", "Jorun",
    "Kofi", "Lucia", "Marek", "Nadia", "Oskar", "Priya", "Quentin", "Rosa", "Stellan", "Tomasz",
    "Ulla", "Viktor", "Wanda", "Xavier", "Yusuf", "Zelda", "Aurel", "Bettina", "Cyrus", "Delphine",
    "Emeric", "Fiona", "Gustav", "Helga", "Imre", "Janek", "Kasimir", "Leona", "Mirek", "Noor",
    "Odile", "Pavel", "Quirin", "Renata", "Sigrid", "Teodor", "Ursula", "Vesna", "Wendel", "Yara",
    "Zoran", "Agnes", "Benedikt", "Clio", "Dmitri", "Esme", "Florin", "Greta", "Hugo", "Ines",
    "Jasper", "Katrin",
]

RING = {
    "sample_id": "ev-ring",
    "homonym": "ring",
    "judged_meaning": "a characteristic sound",
    "precontext": "John looked at his savings and smiled. He had been careful with his money for "
                  "months. Now, he finally felt ready to make a big decision for their anniversary.",
    "sentence": "He told his girlfriend he would give her a ring.",
    "ending": "John was excited to finally buy the special piece of jewelry.",
    "choices": [1, 1, 1, 1, 1],
}


def ratings_for(rng, target, n):
    """Integer ratings scattered around a target level."""
    out = []
    for _ in range(n):
        r = int(round(target + rng.gauss(0.0, 0.8)))
        out.append(min(5, max(1, r)))
    return out


def finish(rec):
    ch = rec["choices"]
    rec["average"] = statistics.fmean(ch)
    rec["stdev"] = statistics.stdev(ch)
    return rec


def make_sample(rng, sid, name, homonym, judged_idx, story_idx, ratings, drop_ending=False):
    tmpl, senses = HOMONYMS[homonym]
    meaning = senses[judged_idx][0]
    setup = senses[story_idx][1]
    ending = senses[story_idx][2]
    f1, f2 = rng.sample(FILLERS, 2)
    return finish({
        "sample_id": sid,
        "homonym": homonym,
        "judged_meaning": meaning,
        "precontext": f"{name} {setup}. {f1}. {f2}.",
        "sentence": tmpl.format(name=name),
        "ending": None if drop_ending else ending,
        "choices": ratings,
    })


def build_split(rng, prefix, count, names, zero_sigma_levels=(), start=0):
    out = []
    homonyms = sorted(HOMONYMS)
    for level, sid in zero_sigma_levels:
        name = names.pop(0)
        h = rng.choice(homonyms)
        judged = rng.randrange(2)
        story = judged if level >= 3 else 1 - judged
        out.append(make_sample(rng, sid, name, h, judged, story, [level] * 5))
    for k in range(count):
        name = names.pop(0)
        h = homonyms[(start + k) % len(homonyms)]
        judged = rng.randrange(2)
        supports = rng.random() < 0.5
        story = judged if supports else 1 - judged
        target = rng.uniform(3.5, 5.0) if supports else rng.uniform(1.0, 2.8)
        n = rng.choice([5, 5, 6])
        out.append(make_sample(rng, f"{prefix}-{k:02d}", name, h, judged, story,
                               ratings_for(rng, target, n), drop_ending=(k % 9 == 4)))
    return out


def unit(v):
    norm = math.sqrt(sum(x * x for x in v))
    return [x / norm for x in v]


def sense_vector(meaning, dim):
    r = random.Random("meaning:" + meaning)
    return unit([r.gauss(0.0, 1.0) for _ in range(dim)])


def embeddings_for(samples, dim=12):
    rows = []
    for s in samples:
        m = sense_vector(s["judged_meaning"], dim)
        r = random.Random("story:" + s["sample_id"])
        a = (s["average"] - 1.0) / 4.0
        noise = [r.gauss(0.0, 1.0) for _ in range(dim)]
        story = unit([a * mi + (1.0 - a) * 0.6 * ni + 0.15 * ni for mi, ni in zip(m, noise)])
        rows.append({"id": s["sample_id"] + ":story", "vector": [round(x, 6) for x in story]})
        rows.append({"id": s["sample_id"] + ":meaning", "vector": [round(x, 6) for x in m]})
    return rows


def response_for(rng, s, k):
    """Scripted model output: mostly bare integers, a few chatty ones, one garbage."""
    guess = min(5, max(1, int(round(s["average"] + rng.choice([-1, 0, 0, 0, 1])))))
    if s["sample_id"] == "ev-ring":
        return "1"
    if k == 7:
        return "The narrative does not say."
    if k % 5 == 2:
        return f"Rating: {guess}"
    if k % 5 == 4:
        return f"I would rate this a {guess}."
    if k % 6 == 5:
        return f" {guess}\n"
    return str(guess)


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


# --- independent prompt rendering for the ring goldens ----------------------

def render(tmpl, s):
    # Single pass so substituted text is never rescanned.
    slots = {
        "{homonym}": s["homonym"],
        "{judged_meaning}": s["judged_meaning"],
        "{precontext}": s["precontext"],
        "{sentence}": s["sentence"],
        "{ending}": s["ending"] if s["ending"] is not None else "none",
    }
    out, i = [], 0
    while i < len(tmpl):
        for name, value in slots.items():
            if tmpl.startswith(name, i):
                out.append(value)
                i += len(name)
                break
        else:
            out.append(tmpl[i])
            i += 1
    return "".join(out)


def golden_text(name):
    text = (GOLD / name).read_text(encoding="utf-8")
    assert text.endswith("\n")
    return text[:-1]


def pick_shots(train):
    shots = []
    for level in range(1, 6):
        cands = [s for s in train if s["average"] == level]
        best = min(cands, key=lambda s: (s["stdev"], s["sample_id"]))
        shots.append(best)
    return shots


def main():
    rng = random.Random(20260214)
    MINI.mkdir(parents=True, exist_ok=True)
    names = list(NAMES)

    eval_rows = [finish(dict(RING))] + build_split(rng, "ev", 19, names, start=3)
    train = build_split(rng, "tr", 24, names, zero_sigma_levels=[
        (1, "tr-z1"), (2, "tr-z2b"), (2, "tr-z2a"), (3, "tr-z3"), (4, "tr-z4"), (5, "tr-z5")])
    dev = build_split(rng, "dv", 12, names, start=5)

    write_jsonl(MINI / "train.jsonl", train)
    write_jsonl(MINI / "dev.jsonl", dev)
    write_jsonl(MINI / "eval.jsonl", eval_rows)
    write_jsonl(MINI / "embeddings.jsonl", embeddings_for(train + dev + eval_rows))

    write_json(MINI / "schema_map.json", {
        "id": "sample_id",
        "homonym": "homonym",
        "judged_meaning": "judged_meaning",
        "precontext": "precontext",
        "sentence": "sentence",
        "ending": "ending",
        "gold_mean": "average",
        "gold_std": "stdev",
        "ratings": "choices",
        "sigma_convention": "sample",
    })

    script = {"*": "3"}
    for k, s in enumerate(eval_rows):
        script[s["sentence"]] = response_for(rng, s, k)
    write_json(MINI / "mock_script.json", script)

    write_json(MINI / "mini.json", {
        "seed": 20260214,
        "schema_map": "schema_map.json",
        "data": {"train": "train.jsonl", "dev": "dev.jsonl", "test": "eval.jsonl"},
        "embeddings": "embeddings.jsonl",
        "provider": {"kind": "mock", "script": "mock_script.json", "model": "mock-chat"},
        "parallelism": 1,
        "output_dir": "out",
        "training": {"holdout": 0.15, "learning_rate": 0.05, "max_epochs": 500, "patience": 3},
        "loss": {"loss": "mse", "lambda_r": 0.25, "lambda_u": 0.5},
        "analysis": {"top_k": 5, "bin_width": 0.25, "disagreement_threshold": 1.0},
        "systems": [
            {"id": "p1-strict", "kind": "prompt", "strategy": "p1", "parse": "strict"},
            {"id": "p2-lenient", "kind": "prompt", "strategy": "p2", "parse": "lenient"},
            {"id": "ridge-f8", "kind": "ridge", "schema": "f8", "alpha": 1.0},
            {"id": "composite-f23", "kind": "composite", "schema": "f23"},
        ],
    })

    # Ring transcripts.
    ring = eval_rows[0]
    p2 = render(golden_text("p2_template.txt"), ring)
    (GOLD / "p2_ring.txt").write_text("[system]\n" + p2 + "\n", encoding="utf-8")

    example = golden_text("p1_example_template.txt")
    parts = ["[system]\n" + golden_text("p1_system.txt") + "\n"]
    for shot in pick_shots(train):
        parts.append("\n[user]\n" + render(example, shot) + "\n")
        parts.append("\n[assistant]\n" + str(int(shot["average"])) + "\n")
    parts.append("\n[user]\n" + render(golden_text("p1_user_template.txt"), ring) + "\n")
    (GOLD / "p1_ring.txt").write_text("".join(parts), encoding="utf-8")


if __name__ == "__main__":
    main()
