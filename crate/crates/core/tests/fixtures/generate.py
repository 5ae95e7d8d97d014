"""Regenerates the evaluation fixtures in this directory.

Ground truth: 20 images of 512x512 px, objects placed one per 100 px grid cell
so no two overlap. Predictions are derived from the truth with a fixed recipe
whose outcome (TP, misclass, mislocated, dropped, spurious) is decided here,
so the expected per-class counts are known without running any matcher.
"""
import json
import math
import random

CLASSES = ["access_aisle", "curbside", "dp_no_aisle", "dp_one_aisle", "dp_two_aisle", "one_aisle", "two_aisle"]
# category names as an annotation tool might spell them
SPELLING = {"access_aisle": "Access Aisle", "dp_one_aisle": "dp-one-aisle", "two_aisle": "TWO_AISLE"}

rng = random.Random(20240611)


def rect(cx, cy, l, w, th):
    ax, ay = math.cos(th) * l / 2, math.sin(th) * l / 2
    nx, ny = -math.sin(th) * w / 2, math.cos(th) * w / 2
    pts = [(cx - ax - nx, cy - ay - ny), (cx + ax - nx, cy + ay - ny), (cx + ax + nx, cy + ay + ny), (cx - ax + nx, cy - ay + ny)]
    return [round(v, 3) for p in pts for v in p]


def envelope(poly):
    xs, ys = poly[0::2], poly[1::2]
    return [min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys)]


images, anns = [], []
preds = []
expected = {c: {"tp": 0, "fp": 0, "fn": 0} for c in CLASSES if c != "access_aisle"}
hist = {c: 0 for c in CLASSES}
next_ann = 1
for img in range(1, 21):
    images.append({"id": img, "file_name": f"tile_{img:03d}.png", "width": 512, "height": 512})
    cells = [(cx, cy) for cx in range(5) for cy in range(5)]
    rng.shuffle(cells)
    n = rng.randint(3, 9)
    free = cells[n:]
    for (gx, gy) in cells[:n]:
        cls = rng.choice(CLASSES)
        cx, cy = gx * 100 + 50 + rng.uniform(-8, 8), gy * 100 + 50 + rng.uniform(-8, 8)
        poly = rect(cx, cy, rng.uniform(30, 60), rng.uniform(12, 30), rng.uniform(0, math.pi))
        ann = {"id": next_ann, "image_id": img, "category_id": CLASSES.index(cls) + 1, "area": 0, "iscrowd": 0}
        if rng.random() < 0.1:
            ann["segmentation"] = []
            ann["bbox"] = envelope(poly)
        else:
            ann["segmentation"] = [poly]
            ann["bbox"] = envelope(poly)
        anns.append(ann)
        next_ann += 1
        hist[cls] += 1
        if cls == "access_aisle":
            continue
        env = ann["bbox"]
        jitter = [env[0] + rng.uniform(-1, 1), env[1] + rng.uniform(-1, 1), env[2], env[3]]
        fate = rng.random()
        if fate < 0.6:
            preds.append({"image_id": img, "class": cls, "bbox": jitter, "confidence": round(rng.uniform(0.3, 1), 3)})
            expected[cls]["tp"] += 1
        elif fate < 0.75:
            other = rng.choice([c for c in expected if c != cls])
            preds.append({"image_id": img, "class": other, "bbox": jitter, "confidence": 0.5})
            expected[other]["fp"] += 1
            expected[cls]["fn"] += 1
        elif fate < 0.85 and free:
            fx, fy = free.pop()
            preds.append({"image_id": img, "class": cls, "bbox": [fx * 100 + 30, fy * 100 + 30, 40, 20], "confidence": 0.4})
            expected[cls]["fp"] += 1
            expected[cls]["fn"] += 1
        else:
            expected[cls]["fn"] += 1
    if free and rng.random() < 0.5:
        fx, fy = free.pop()
        other = rng.choice(list(expected))
        preds.append({"image_id": img, "class": other, "bbox": [fx * 100 + 20, fy * 100 + 20, 30, 50], "confidence": 0.35})
        expected[other]["fp"] += 1

cats = [{"id": i + 1, "name": SPELLING.get(c, c)} for i, c in enumerate(CLASSES)]
with open("coco_20.json", "w") as f:
    json.dump({"images": images, "annotations": anns, "categories": cats}, f, indent=1)
with open("preds_20.ndjson", "w") as f:
    for p in preds:
        f.write(json.dumps(p) + "\n")
with open("expected_20.json", "w") as f:
    json.dump({"histogram": hist, "total": sum(hist.values()), "counts": expected}, f, indent=1, sort_keys=True)
print(json.dumps({"histogram": hist, "total": sum(hist.values())}))
