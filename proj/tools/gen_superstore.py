#!/usr/bin/env python3
"""Generates fixtures/data/superstore.csv: 2022 retail orders with a sales
level shift entering March and profit tracking 0.2 * sales."""

import csv
import random
import sys
from pathlib import Path

SEED = 2022
ORDERS_PER_MONTH = 60

STATES = [("California", 9.0), ("New York", 7.0), ("Texas", 2.5), ("Washington", 2.0),
          ("Pennsylvania", 1.8), ("Florida", 1.6), ("Illinois", 1.4), ("Ohio", 1.2),
          ("Michigan", 1.0), ("Virginia", 0.9)]
SEGMENTS = [("Consumer", 5.0), ("Corporate", 3.0), ("Home Office", 2.0)]
CATEGORIES = {
    "Office Supplies": ["Binders", "Paper", "Storage", "Art"],
    "Technology": ["Phones", "Accessories", "Machines"],
    "Furniture": ["Chairs", "Tables", "Bookcases"],
}
MANUFACTURERS = [("Other", 6.0), ("GBC", 4.0), ("Avery", 2.0), ("Logitech", 1.5), ("Hon", 1.2), ("Canon", 1.0)]
CUSTOMERS = [f"Customer {i:02d}" for i in range(1, 31)]


def pick(rng, weighted):
    names = [n for n, _ in weighted]
    weights = [w for _, w in weighted]
    return rng.choices(names, weights=weights, k=1)[0]


def main(out):
    rng = random.Random(SEED)
    rows = []
    order = 1
    for month in range(1, 13):
        level = 1.0 if month < 3 else 2.0
        for _ in range(ORDERS_PER_MONTH):
            day = rng.randint(1, 28)
            category = rng.choice(sorted(CATEGORIES))
            sales = round(level * rng.uniform(80.0, 120.0), 2)
            profit = round(0.2 * sales + rng.gauss(0.0, 2.0), 2)
            rows.append({
                "Order ID": f"ORD-{order:04d}",
                "Order Date": f"2022-{month:02d}-{day:02d}",
                "Month": f"2022-{month:02d}",
                "Segment": pick(rng, SEGMENTS),
                "Category": category,
                "Sub-Category": rng.choice(CATEGORIES[category]),
                "Manufacturer": pick(rng, MANUFACTURERS),
                "Customer": rng.choice(CUSTOMERS),
                "State/Province": pick(rng, STATES),
                "Sales": f"{sales:.2f}",
                "Profit": f"{profit:.2f}",
            })
            order += 1
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "fixtures/data/superstore.csv")
