"""Regenerate the packaged default domain data (restaurant ordering).

The catalog is built so goals are always satisfiable while hidden style
constraints still force rejection runs: every (cuisine, zip) cell carries
ten products, one per style, all at the cell's price level, so an
unvolunteered style preference means walking the cell in catalog order and
patience can genuinely run out.

Run from the repo root:  python3 scripts/make_default_data.py
"""

import json
from pathlib import Path

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "convreco" / "data"

CUISINES = ["japanese", "italian", "thai", "mexican", "chinese", "indian"]
ZIPS = ["95070", "95014", "94040", "95112"]
PRICES = ["cheap", "moderate", "upscale"]
STYLES = [
    "casual", "family", "romantic", "modern", "rustic",
    "vintage", "lively", "quiet", "elegant", "artsy",
]

FIRST_WORDS = [
    "Amber", "Cedar", "Velvet", "Copper", "Juniper", "Marble",
    "Willow", "Ember", "Harbor", "Lantern", "Meadow", "Orchid",
    "Pebble", "Saffron", "Thistle", "Walnut", "Ivory", "Maple",
    "Coral", "Fable",
]
SECOND_WORDS = [
    "Table", "Corner", "Kitchen", "Garden", "House", "Room",
    "Terrace", "Pantry", "Parlor", "Canteen", "Bistro", "Annex",
]

PRICE_TAGS = {"cheap": 9.0, "moderate": 24.0, "upscale": 58.0}

SCHEMA = {
    "slots": [
        {"name": "food", "value_domain": "enumerated", "required": True, "prompt_key": "ask_food"},
        {
            "name": "location",
            "value_domain": "open_text",
            "required": True,
            "prompt_key": "ask_location",
        },
        {
            "name": "price_range",
            "value_domain": "enumerated",
            "required": True,
            "prompt_key": "ask_price",
        },
        {"name": "style", "value_domain": "enumerated", "required": False, "prompt_key": ""},
    ],
    "patterns": {"location": "\\b\\d{5}\\b"},
}

SYNONYMS = {
    "nippon cuisine": "japanese",
    "sushi": "japanese",
    "pasta": "italian",
    "noodles": "chinese",
    "curry": "indian",
    "budget": "cheap",
    "fancy": "upscale",
    "cozy": "casual",
}

TEMPLATES = [
    {"id": "greet.a", "act_kind": "greet", "pattern": "hi there! what can i help you order today?"},
    {"id": "greet.b", "act_kind": "greet", "pattern": "hello! hungry for something?"},
    {"id": "ask_food", "act_kind": "ask", "pattern": "what kind of cuisine are you in the mood for?"},
    {"id": "ask_food.b", "act_kind": "ask", "pattern": "any particular cuisine you'd like?"},
    {"id": "ask_location", "act_kind": "ask", "pattern": "what zip code should it be near?"},
    {"id": "ask_location.b", "act_kind": "ask", "pattern": "which zip code are you in?"},
    {"id": "ask_price", "act_kind": "ask", "pattern": "what price range works for you?"},
    {"id": "ask_price.b", "act_kind": "ask", "pattern": "were you thinking cheap, moderate, or upscale?"},
    {"id": "recommend.a", "act_kind": "recommend", "pattern": "how about {product_name} for {price}?"},
    {"id": "recommend.b", "act_kind": "recommend", "pattern": "i think you'd like {product_name}, {price}."},
    {"id": "recommend.c", "act_kind": "recommend", "pattern": "{product_name} could be a great fit at {price}."},
    {"id": "confirm.a", "act_kind": "confirm", "pattern": "so that's {product_name}. should i place the order?"},
    {"id": "confirm.b", "act_kind": "confirm", "pattern": "ready to order {product_name}?"},
    {"id": "order.a", "act_kind": "place_order", "pattern": "done! i've placed your order: {order_summary}."},
    {"id": "order.b", "act_kind": "place_order", "pattern": "your order is in: {order_summary}."},
    {"id": "fallback.a", "act_kind": "fallback", "pattern": "sorry, i'm not finding anything else that fits."},
    {"id": "fallback.b", "act_kind": "fallback", "pattern": "hmm, i don't have more options for that right now."},
]


def build_catalog():
    names = [f"{a} {b}" for a in FIRST_WORDS for b in SECOND_WORDS]
    assert len(names) >= len(CUISINES) * len(ZIPS) * len(STYLES)
    products = []
    idx = 0
    for ci, cuisine in enumerate(CUISINES):
        for zi, zip_code in enumerate(ZIPS):
            cell = ci * len(ZIPS) + zi
            price = PRICES[cell % len(PRICES)]
            # rotate the style order per cell so no style is globally early
            for offset in range(len(STYLES)):
                style = STYLES[(cell + offset) % len(STYLES)]
                products.append(
                    {
                        "id": f"p{idx:03d}",
                        "name": names[idx],
                        "price": PRICE_TAGS[price] + (idx % 7),
                        "attributes": {
                            "food": cuisine,
                            "location": zip_code,
                            "price_range": price,
                            "style": style,
                        },
                    }
                )
                idx += 1
    return products


def main():
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    (DATA_DIR / "schema.json").write_text(json.dumps(SCHEMA, indent=2) + "\n")
    (DATA_DIR / "synonyms.json").write_text(json.dumps(SYNONYMS, indent=2) + "\n")
    (DATA_DIR / "templates.json").write_text(json.dumps(TEMPLATES, indent=2) + "\n")
    (DATA_DIR / "catalog.json").write_text(json.dumps(build_catalog(), indent=2) + "\n")
    print(f"wrote default data to {DATA_DIR}")


if __name__ == "__main__":
    main()
