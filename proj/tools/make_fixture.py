#!/usr/bin/env python3
# Copyright 2026 The qsynth Authors. All rights reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes the hermetic fixture: queries, products, candidate rewrites, config.

Output is a pure function of --seed. Run from the repository root:

    python3 tools/make_fixture.py --out fixtures
"""

import argparse
import json
import os
import random

# Ten departments with their own vocabulary, so the catalog clusters the way
# a real one does.
DEPARTMENTS = {
    "kitchen": {
        "categories": ["rice cooker", "electric kettle", "blender", "toaster oven", "frying pan"],
        "brands": ["Sapporo", "Calder", "Harbor", "Ingot", "Quanta"],
        "attrs": ["stainless", "nonstick", "ceramic", "digital", "compact", "induction ready",
                  "dishwasher safe", "programmable"],
        "specs": ["1.5L", "2L", "3L", "800W", "1200W", "28cm", "32cm"],
        "uses": ["small apartment", "busy mornings", "family of four", "meal prep",
                 "dorm rooms",
                 "holiday baking", "camping kitchens", "office pantry", "tiny kitchens", "large batches"],
    },
    "tools": {
        "categories": ["power drill", "garden hose", "storage rack", "tool box", "tape measure"],
        "brands": ["Kobalt", "Rivet", "Brixton", "Falkor", "Tundra"],
        "attrs": ["cordless", "heavy duty", "brushless", "galvanized", "magnetic", "rustproof",
                  "expandable", "contractor grade"],
        "specs": ["18V", "20V", "50ft", "100ft", "5 tier", "26 inch", "25ft"],
        "uses": ["garage workshop", "deck building", "backyard garden", "weekend repairs",
                 "furniture assembly",
                 "fence posts", "balcony plants", "shed organizing", "cabinet installs", "renovation jobs"],
    },
    "fitness": {
        "categories": ["yoga mat", "dumbbell set", "running shoes", "jump rope", "resistance bands"],
        "brands": ["Vexa", "Helix", "Kestrel", "Solace", "Zenith"],
        "attrs": ["non slip", "breathable", "cushioned", "adjustable", "sweat resistant",
                  "extra thick", "lightweight", "high density"],
        "specs": ["6mm", "10mm", "20kg", "40kg", "size 42", "size 44", "9ft"],
        "uses": ["gym workouts", "hot yoga", "marathon training", "home workouts",
                 "beginners",
                 "pilates classes", "trail running", "boxing drills", "physical therapy", "seniors"],
    },
    "outdoor": {
        "categories": ["camping tent", "sleeping bag", "fishing rod", "hiking backpack",
                       "rain jacket"],
        "brands": ["Terra", "Orion", "Umbra", "Yarrow", "Dorado"],
        "attrs": ["waterproof", "ultralight", "windproof", "insulated", "packable",
                  "ripstop", "four season", "telescopic"],
        "specs": ["2 person", "4 person", "40L", "60L", "-10C", "2.1m", "XL"],
        "uses": ["winter camping", "backpacking trips", "lake fishing", "rainy hikes",
                 "high altitude",
                 "desert treks", "sea fishing", "festival camping", "scout troops", "alpine climbs"],
    },
    "bedroom": {
        "categories": ["pillow", "duvet cover", "bath towel", "mattress topper", "blackout curtain"],
        "brands": ["Wexford", "Lyric", "Galen", "Eldon", "Jasper"],
        "attrs": ["cotton", "memory foam", "hypoallergenic", "silky", "quick dry", "organic",
                  "cooling", "plush"],
        "specs": ["queen size", "king size", "twin size", "600 thread", "set of 2",
                  "52x84", "3 inch"],
        "uses": ["back pain relief", "hot sleepers", "allergy sufferers", "guest rooms",
                 "night shift workers",
                 "side sleepers", "kids bedrooms", "beach houses", "day sleepers", "airbnb hosts"],
    },
    "appliances": {
        "categories": ["air purifier", "humidifier", "space heater", "vacuum cleaner",
                       "steam iron"],
        "brands": ["Zephyr", "Lumio", "Vanta", "Norvik", "Acme"],
        "attrs": ["quiet", "hepa", "ultrasonic", "oscillating", "bagless", "cordless",
                  "energy saving", "smart"],
        "specs": ["1500W", "300 sq ft", "4L", "6L", "2400Pa", "H13", "2000W"],
        "uses": ["pet owners", "humid climate", "large living room", "drafty basements",
                 "hard water areas",
                 "smokers homes", "dry winters", "garage workshops", "long hair", "wrinkled shirts"],
    },
    "electronics": {
        "categories": ["bluetooth speaker", "gaming mouse", "mechanical keyboard", "power bank",
                       "dash cam"],
        "brands": ["Quasar", "Voltix", "Pixelon", "Arclight", "Nexon"],
        "attrs": ["wireless", "rgb", "hot swappable", "fast charging", "noise cancelling",
                  "ergonomic", "waterproof", "low latency"],
        "specs": ["10000mAh", "20000mAh", "4K", "1080p", "16000dpi", "TKL", "65W"],
        "uses": ["competitive gaming", "long flights", "road trips", "pool parties",
                 "home office",
                 "streaming setups", "camping trips", "typing fast", "uber drivers", "video calls"],
    },
    "baby": {
        "categories": ["baby stroller", "baby monitor", "high chair", "diaper bag", "car seat"],
        "brands": ["Bambino", "Cuddle", "Tinytot", "Nestle", "Pebble"],
        "attrs": ["foldable", "convertible", "bpa free", "washable", "reclining",
                  "travel system", "padded", "anti colic"],
        "specs": ["0-36 months", "up to 22kg", "5 point", "2.4GHz", "30L", "one hand fold",
                  "isofix"],
        "uses": ["newborn babies", "twins", "city walks", "grandparents", "daycare",
                 "airport travel", "small cars", "picky eaters", "night feeding", "jogging parents"],
    },
    "pets": {
        "categories": ["cat litter box", "dog leash", "pet bed", "cat tree", "pet feeder"],
        "brands": ["Pawly", "Whisker", "Barkley", "Furrow", "Mittens"],
        "attrs": ["self cleaning", "retractable", "orthopedic", "chew proof", "automatic",
                  "enclosed", "reflective", "washable"],
        "specs": ["16ft", "26ft", "5 level", "6 meals", "XXL", "medium", "small breed"],
        "uses": ["large dogs", "senior cats", "multi cat homes", "puppies", "apartment pets",
                 "shedding breeds", "indoor cats", "night walks", "anxious dogs", "busy owners"],
    },
    "accessories": {
        "categories": ["sunglasses", "leather wallet", "wool sweater", "ski goggles",
                       "bike helmet"],
        "brands": ["Monarch", "Riviera", "Saville", "Alpine", "Cortex"],
        "attrs": ["polarized", "rfid blocking", "merino", "anti fog", "mips", "slim fit",
                  "unisex", "vintage"],
        "specs": ["uv400", "bifold", "size M", "size L", "otg", "58cm", "cat 3"],
        "uses": ["sensitive skin", "ski trips", "daily commute", "gifting", "mountain biking",
                 "glacier hiking", "minimalists", "office wear", "snowboarding", "road cycling"],
    },
}

CATEGORIES = [c for d in DEPARTMENTS.values() for c in d["categories"]]
DEPT_OF = {c: name for name, d in DEPARTMENTS.items() for c in d["categories"]}

# Product heads for planted lexical false positives: accessories that name
# the target product but are something else.
ACCESSORY_HEADS = ["cleaning brush", "replacement filter", "carry bag", "wall mount",
                   "storage case", "spare parts kit", "protective cover", "instruction manual"]

FLUFF_PREFIX = ["pls need", "any good", "wanna get", "lookin 4", "hey whats a",
                "need help finding", "srsly need", "ok so need"]
FLUFF_SUFFIX = ["pls??", "lol", "asap!!", "any tips??", "help pls", "kinda cheap?",
                "thx!!", "idk??"]

QUERIES_PER_TYPE = 50
PRODUCTS_TOTAL = 10000
PLANTED_QUERIES = 50
PLANTED_PER_QUERY = 2


def bigrams(text):
    return {text[i:i + 2] for i in range(len(text) - 1)}


def jaccard(a, b):
    x, y = bigrams(a), bigrams(b)
    if not x and not y:
        return 1.0
    return len(x & y) / len(x | y)


def words(text):
    return set(text.lower().replace("?", " ").replace("!", " ").split())


def vocab(cat):
    return DEPARTMENTS[DEPT_OF[cat]]


def uses_of(cat):
    """Each category owns two of its department's ten use phrases."""
    v = vocab(cat)
    i = v["categories"].index(cat)
    return [v["uses"][i], v["uses"][i + 5]]


def make_query(rng, qtype, cat):
    v = vocab(cat)
    use = rng.choice(uses_of(cat))
    if qtype == "qa":
        text = rng.choice([
            f"which {cat} is best for {use}",
            f"how to choose a {cat} for {use}",
            f"what {cat} works well for {use}",
        ])
    elif qtype == "alternative":
        brand = rng.choice(v["brands"])
        text = rng.choice([
            f"{cat} similar to {brand} but cheaper for {use}",
            f"alternative to {brand} {cat} for {use}",
        ])
    elif qtype == "negative":
        attr = rng.choice(v["attrs"])
        text = rng.choice([
            f"{cat} not {attr} for {use}",
            f"{cat} without {attr} design for {use}",
        ])
    else:
        text = rng.choice([
            f"{cat} suitable for {use}",
            f"is a {cat} safe for {use}",
        ])
    return text, use


def product_title(rng, cat, use=None):
    v = vocab(cat)
    a1, a2 = rng.sample(v["attrs"], 2)
    title = f"{rng.choice(v['brands'])} {a1} {a2} {cat} {rng.choice(v['specs'])}"
    if use:
        title += f" for {use}"
    return title


def candidate_pools(rng, cat, use, other_cats):
    v = vocab(cat)
    product_style = set()
    colloquial = set()
    while len(product_style) < 24:
        a = rng.choice(v["attrs"])
        form = rng.randrange(3)
        if form == 0:
            product_style.add(f"{a} {cat} {rng.choice(v['specs'])} for {use}")
        elif form == 1:
            product_style.add(f"{a} {cat} for {use}")
        else:
            product_style.add(f"{rng.choice(v['brands'])} {a} {cat} for {use}")
    while len(colloquial) < 24:
        form = rng.randrange(3)
        if form == 0:
            colloquial.add(f"{rng.choice(FLUFF_PREFIX)} {cat} 4 {use} {rng.choice(FLUFF_SUFFIX)}")
        elif form == 1:
            colloquial.add(f"{rng.choice(FLUFF_PREFIX)} {cat} thats ok for {use}")
        else:
            colloquial.add(f"{cat} for {use}?? {rng.choice(FLUFF_SUFFIX)}")
    off = set()
    while len(off) < 4:
        other = rng.choice(other_cats)
        ov = vocab(other)
        off.add(f"{rng.choice(ov['attrs'])} {other} {rng.choice(ov['specs'])}")
    return sorted(product_style), sorted(colloquial), sorted(off)


def pick_balanced(rng, query, product_style, colloquial):
    """Three of each style with closely matched mean Jaccard to the query."""
    best = None
    for _ in range(400):
        a = rng.sample(product_style, 3)
        b = rng.sample(colloquial, 3)
        ma = sum(jaccard(query, c) for c in a) / 3
        mb = sum(jaccard(query, c) for c in b) / 3
        # Colloquial candidates must not lose on relevance.
        gap = abs(ma - mb) + (0.0 if mb >= ma else 0.05)
        if best is None or gap < best[0]:
            best = (gap, sorted(a), sorted(b))
    return best[1], best[2]


def planted_title(rng, q):
    """Accessory title that echoes the query but has a different head."""
    cat, use = q["_cat"], q["_use"]
    qwords = words(q["text"])
    heads = [h for h in ACCESSORY_HEADS if not (words(h) & qwords)]
    for _ in range(100):
        head = rng.choice(heads)
        title = rng.choice([
            f"{cat} {head} for {use}",
            f"{rng.choice(vocab(cat)['brands'])} {cat} {head} for {use}",
            f"universal {cat} {head} for {use}",
        ])
        if jaccard(q["text"], title) >= 0.4:
            return title, head
    raise RuntimeError(f"no planted title for {q['id']}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="fixtures")
    ap.add_argument("--seed", type=int, default=20260415)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    os.makedirs(args.out, exist_ok=True)

    queries = []
    n = 0
    for qtype in ["qa", "alternative", "negative", "knowledge"]:
        for i in range(QUERIES_PER_TYPE):
            cat = CATEGORIES[(n * 7) % len(CATEGORIES)]
            text, use = make_query(rng, qtype, cat)
            queries.append({"id": f"{qtype}-{i:03d}", "text": text, "query_type": qtype,
                            "_cat": cat, "_use": use})
            n += 1

    products = []
    regular = PRODUCTS_TOTAL - PLANTED_QUERIES * PLANTED_PER_QUERY
    for i in range(regular):
        cat = CATEGORIES[i % len(CATEGORIES)]
        use = rng.choice(uses_of(cat))
        products.append({"id": f"p{i:05d}", "title": product_title(rng, cat, use),
                         "attributes": {"category": cat}})

    planted = []
    for q in sorted(rng.sample(queries, PLANTED_QUERIES), key=lambda q: q["id"]):
        seen = set()
        while len(seen) < PLANTED_PER_QUERY:
            title, head = planted_title(rng, q)
            if title in seen:
                continue
            seen.add(title)
            planted.append({"title": title,
                            "attributes": {"category": head, "planted": "lexical_fp",
                                           "target_query": q["id"]}})
    # Planted products get ids interleaved with the rest of the catalog.
    slots = sorted(rng.sample(range(PRODUCTS_TOTAL), len(planted)))
    catalog = []
    it_reg, it_pl = iter(products), iter(planted)
    for pid in range(PRODUCTS_TOTAL):
        row = next(it_pl) if slots and slots[0] == pid else next(it_reg)
        if slots and slots[0] == pid:
            slots.pop(0)
        row["id"] = f"p{pid:05d}"
        catalog.append(row)
    products = catalog

    candidates = []
    for q in queries:
        others = [c for c in CATEGORIES if c != q["_cat"]]
        ps, cs, off = candidate_pools(rng, q["_cat"], q["_use"], others)
        a, b = pick_balanced(rng, q["text"], ps, cs)
        cands = a + b + off
        rng.shuffle(cands)
        candidates.append({"query_id": q["id"], "candidates": cands})

    def dump(name, rows):
        with open(os.path.join(args.out, name), "w", encoding="utf-8", newline="\n") as f:
            for r in rows:
                f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")

    dump("queries.jsonl", [{k: v for k, v in q.items() if not k.startswith("_")} for q in queries])
    dump("products.jsonl", products)
    dump("candidates.jsonl", candidates)

    config = {
        "min_k": 5,
        "top_k": 200,
        "business_threshold": 0.35,
        "seed": 7,
        "jobs": 1,
        "on_remote_error": "drop",
        "label_thresholds": {"relevant": 0.5, "partial": 0.15},
        "generator": {"kind": "policy", "mode": "greedy", "k": 5},
        "index": {"dim": 256, "partitions": 96, "probes": 20, "kmeans_iterations": 25, "seed": 0},
        "training": {
            "candidates": "candidates.jsonl",
            "iterations": 150,
            "group_size": 8,
            "step_size": 100.0,
            "k": 5,
            "alpha": 1.0,
            "beta": 0.5,
            "gamma": 0.1,
            "lm": {"order": 3, "delta": 0.1, "mode": "char"},
        },
    }
    with open(os.path.join(args.out, "fixture.json"), "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
