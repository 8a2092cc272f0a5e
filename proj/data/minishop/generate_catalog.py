#!/usr/bin/env python3
"""Writes the synthetic MiniShop catalog and goal set (seeded, reproducible)."""
import json
import random
from pathlib import Path

SEED = 20241016
HERE = Path(__file__).resolve().parent

# Hand-written products referenced by the built-in exemplars and tests.
FIXED = [
    {
        "asin": "B07B4KXQZV",
        "title": "Lodge Bedspread Full/Queen Size Quilt with 2 Shams, Cabin 3-Piece Reversible All Season Quilt Set, Stonehurst Collection",
        "price": 44.99,
        "category": "bedding",
        "attributes": ["queen size", "reversible", "all season"],
        "options": {"color": ["redwood", "brown", "grey"], "size": ["full/queen", "king"]},
        "description": "Rustic quilt coverlet bed set with two shams.",
    },
    {
        "asin": "B07PGQ3JYB",
        "title": "Lodge Bedspread Full/Queen Size Quilt with 2 Shams, Cabin 3-Piece Reversible All Season Quilt Set, Wilderness Collection",
        "price": 44.99,
        "category": "bedding",
        "attributes": ["queen size", "reversible", "all season"],
        "options": {"color": ["moose - grey", "bear - brown"], "size": ["full/queen", "king"]},
        "description": "Rustic quilt coverlet bed set, wilderness print.",
    },
    {
        "asin": "B07WZBXSK3",
        "title": "Travan 3-Piece Queen Quilt Set Quilted Bedspread Oversized Microfiber Lightweight Coverlet Set with Shams",
        "price": 64.99,
        "category": "bedding",
        "attributes": ["queen size", "lightweight", "microfiber"],
        "options": {"color": ["grey", "navy", "white"], "size": ["queen", "king"]},
        "description": "Oversized lightweight microfiber bedspread for all seasons.",
    },
    {
        "asin": "B07JX7QM8G",
        "title": "High Performance Paint Contrast Projector, 1080P Native Home Theater Projector",
        "price": 229.99,
        "category": "projector",
        "attributes": ["high performance", "paint contrast", "1080p"],
        "options": {"color": ["white", "black"]},
        "description": "Native 1080p projector with high contrast paint mode.",
    },
    {
        "asin": "B00PB8BM7Q",
        "title": "Paint Contrast Projector Screen Coating, High Performance Projector Paint",
        "price": 289.00,
        "category": "projector",
        "attributes": ["high performance", "paint contrast"],
        "options": {"size": ["1 gallon", "2 gallon"]},
        "description": "Screen paint for projectors, one gallon covers a wall.",
    },
    {
        "asin": "B09QQLDJ93",
        "title": "Long Clip-In Hair Extension, Natural Looking",
        "price": 30.99,
        "category": "hair extension",
        "attributes": ["long", "clip-in", "natural looking"],
        "options": {"color": ["dark brown", "light brown"]},
        "description": "Clip-in extension made of natural looking fibre.",
    },
]

CATEGORIES = {
    "headphones": {
        "nouns": ["Wireless Headphones", "Over-Ear Headphones", "Earbuds", "Noise Cancelling Headset"],
        "attributes": ["wireless", "noise cancelling", "bluetooth 5.0", "long battery life", "foldable"],
        "options": {"color": ["black", "white", "blue", "rose gold"]},
        "price": (19, 199),
    },
    "running shoes": {
        "nouns": ["Running Shoes", "Trail Running Shoe", "Road Running Sneaker"],
        "attributes": ["lightweight", "breathable", "non slip", "wide fit", "cushioned"],
        "options": {"size": ["7", "8", "9", "10", "11"], "color": ["black", "grey", "red"]},
        "price": (35, 140),
    },
    "coffee": {
        "nouns": ["Ground Coffee", "Whole Bean Coffee", "Espresso Roast", "Cold Brew Coffee"],
        "attributes": ["organic", "dark roast", "medium roast", "fair trade", "decaf"],
        "options": {"size": ["12 ounce", "2 pound"]},
        "price": (8, 45),
    },
    "bedding": {
        "nouns": ["Quilt Set", "Duvet Cover Set", "Bedspread", "Sheet Set"],
        "attributes": ["queen size", "king size", "microfiber", "all season", "lightweight", "reversible"],
        "options": {"color": ["grey", "white", "navy", "redwood"], "size": ["queen", "king"]},
        "price": (25, 120),
    },
    "hair extension": {
        "nouns": ["Clip-In Hair Extension", "Tape-In Hair Extension", "Ponytail Extension"],
        "attributes": ["long", "clip-in", "natural looking", "human hair", "heat resistant"],
        "options": {"color": ["dark brown", "light brown", "blonde", "black"]},
        "price": (12, 90),
    },
    "projector": {
        "nouns": ["Mini Projector", "Home Theater Projector", "Portable Projector"],
        "attributes": ["1080p", "high performance", "portable", "wifi", "paint contrast"],
        "options": {"color": ["white", "black"]},
        "price": (60, 400),
    },
    "phone case": {
        "nouns": ["Phone Case", "Wallet Phone Case", "Rugged Phone Case"],
        "attributes": ["shockproof", "slim", "wireless charging compatible", "clear"],
        "options": {"color": ["black", "clear", "pink", "green"], "model": ["iphone 13", "iphone 14", "galaxy s22"]},
        "price": (6, 35),
    },
    "desk lamp": {
        "nouns": ["LED Desk Lamp", "Architect Desk Lamp", "Clip Desk Lamp"],
        "attributes": ["dimmable", "usb charging port", "eye caring", "touch control"],
        "options": {"color": ["black", "white", "silver"]},
        "price": (15, 80),
    },
}

BRANDS = ["Aurel", "Brisk", "Cadence", "Dovetail", "Ember", "Fjord", "Galen", "Harbor", "Iris", "Juniper", "Kestrel", "Lumen"]
ASIN_CHARS = "ABCDEFGHJKLMNPQRSTUVWXYZ0123456789"


def make_asin(rng, taken):
    while True:
        asin = "B0" + "".join(rng.choice(ASIN_CHARS) for _ in range(8))
        if asin not in taken:
            taken.add(asin)
            return asin


def synthetic_products(rng, count, taken):
    names = sorted(CATEGORIES)
    products = []
    for i in range(count):
        category = names[i % len(names)]
        spec = CATEGORIES[category]
        attrs = sorted(rng.sample(spec["attributes"], rng.randint(1, 3)))
        noun = rng.choice(spec["nouns"])
        brand = rng.choice(BRANDS)
        title = f"{brand} {noun}, " + ", ".join(a.title() for a in attrs)
        lo, hi = spec["price"]
        price = round(rng.uniform(lo, hi), 0) - 0.01
        options = {}
        for name, values in spec["options"].items():
            options[name] = rng.sample(values, rng.randint(2, len(values)))
        products.append(
            {
                "asin": make_asin(rng, taken),
                "title": title,
                "price": price,
                "category": category,
                "attributes": attrs,
                "options": options,
                "description": f"{noun} by {brand}.",
            }
        )
    return products


def goal_for(product, rng, gid):
    attrs = sorted(rng.sample(product["attributes"], rng.randint(1, len(product["attributes"]))))
    options = {}
    for name, values in sorted(product["options"].items()):
        if rng.random() < 0.7:
            options[name] = rng.choice(values)
    cap = float(int(product["price"] * rng.uniform(1.05, 1.4)) + 1)
    parts = [product["category"]] + attrs
    instruction = "i'm looking for " + " ".join(parts)
    if options:
        instruction += " in " + " and ".join(f"{k} {v}" for k, v in options.items())
    instruction += f", and price lower than {cap:.2f} dollars"
    return {
        "id": gid,
        "instruction": instruction,
        "target_category": product["category"],
        "required_attributes": attrs,
        "required_options": options,
        "price_cap": cap,
    }


def main():
    rng = random.Random(SEED)
    taken = {p["asin"] for p in FIXED}
    products = FIXED + synthetic_products(rng, 94, taken)
    products.sort(key=lambda p: p["asin"])
    (HERE / "catalog.json").write_text(json.dumps(products, indent=1) + "\n")

    goals = [
        {
            "id": "ms-0001",
            "instruction": "i need a long clip-in hair extension which is natural looking, and price lower than 40.00 dollars",
            "target_category": "hair extension",
            "required_attributes": ["long", "clip-in", "natural looking"],
            "required_options": {"color": "dark brown"},
            "price_cap": 40.0,
        },
        {
            "id": "ms-0002",
            "instruction": "i'm looking for a high performance paint contrast projector, and price lower than 240.00 dollars",
            "target_category": "projector",
            "required_attributes": ["high performance", "paint contrast"],
            "required_options": {},
            "price_cap": 240.0,
        },
        {
            "id": "ms-0003",
            "instruction": "i'm looking for a queen size bedspread set in the color redwood, and price lower than 60.00 dollars",
            "target_category": "bedding",
            "required_attributes": ["queen size"],
            "required_options": {"color": "redwood"},
            "price_cap": 60.0,
        },
    ]
    pool = [p for p in products if p["asin"] not in {x["asin"] for x in FIXED}]
    for i, product in enumerate(rng.sample(pool, 17)):
        goals.append(goal_for(product, rng, f"ms-{i + 4:04d}"))
    with open(HERE / "goals.jsonl", "w") as out:
        for g in goals:
            out.write(json.dumps(g) + "\n")


if __name__ == "__main__":
    main()
