#!/usr/bin/env python3
"""Regenerates the bundled test fixtures (PDFs and their mock sidecars).

Usage: python3 make_fixtures.py   (writes next to this script)
"""
import json
import os

from reportlab.lib.pagesizes import letter
from reportlab.pdfgen import canvas

HERE = os.path.dirname(os.path.abspath(__file__))
W, H = letter  # 612 x 792


def top(y):
    """Top-left y to reportlab's bottom-left baseline y."""
    return H - y


def new_canvas(path):
    c = canvas.Canvas(path, pagesize=letter, invariant=1)
    c.setAuthor("fixtures")
    c.setTitle(os.path.basename(path))
    return c


def draw_lines(c, x, y, lines, size=10, leading=13, font="Helvetica"):
    c.setFont(font, size)
    for i, line in enumerate(lines):
        c.drawString(x, top(y + size + i * leading), line)
    return [x, y, x + 460, y + size + (len(lines) - 1) * leading + 4]


def assay_report():
    path = os.path.join(HERE, "corpus", "assay_report.pdf")
    c = new_canvas(path)
    pages = []

    # Page 0: title, text, table, formula.
    regions = []
    c.setFont("Helvetica-Bold", 20)
    c.drawString(72, top(90), "Zinc Assay Campaign 2023")
    regions.append({"label": "title", "bbox": [72, 68, 540, 96],
                    "payload": {"text": "Zinc Assay Campaign 2023"}})

    para = ["Drill cores from the northern ridge were split and sampled at one metre",
            "intervals. Samples were crushed, pulverised and digested in aqua regia."]
    bbox = draw_lines(c, 72, 120, para)
    regions.append({"label": "text", "bbox": bbox, "payload": {"text": " ".join(para)}})

    cells = [["Hole", "From (m)", "To (m)", "Zn (%)"],
             ["NR-01", "12", "18", "4.2"],
             ["NR-02", "30", "41", "7.9"],
             ["NR-03", "5", "9", "1.1"]]
    c.setFont("Helvetica-Oblique", 9)
    c.drawString(72, top(190), "Table 1: Zinc grades by drill hole")
    c.setFont("Helvetica", 10)
    for r, row in enumerate(cells):
        for col, val in enumerate(row):
            c.drawString(80 + col * 110, top(212 + r * 18), val)
    c.rect(72, top(272), 450, 72)
    regions.append({"label": "table", "bbox": [72, 180, 522, 272],
                    "payload": {"caption": "Table 1: Zinc grades by drill hole", "cells": cells}})

    c.setFont("Courier", 11)
    c.drawString(200, top(320), "Zn_eq = Zn + 0.8 * Pb")
    regions.append({"label": "formula", "bbox": [190, 305, 420, 328],
                    "payload": {"latex": "Zn_{eq} = Zn + 0.8\\,Pb",
                                "description": "Zinc equivalent grade combining zinc and lead credits"}})
    pages.append({"page_index": 0, "regions": regions})
    c.showPage()

    # Page 1: text, figure, text.
    regions = []
    para = ["Metallurgical testwork on composite samples achieved flotation recoveries",
            "above ninety percent for sphalerite concentrate."]
    bbox = draw_lines(c, 72, 80, para)
    regions.append({"label": "text", "bbox": bbox, "payload": {"text": " ".join(para)}})

    c.rect(72, top(400), 300, 250)
    c.line(72, top(400), 372, top(150))
    c.setFont("Helvetica-Oblique", 9)
    c.drawString(72, top(415), "Figure 1: Cross-section of the northern ridge orebody")
    regions.append({"label": "figure", "bbox": [72, 150, 372, 420],
                    "payload": {"caption": "Figure 1: Cross-section of the northern ridge orebody",
                                "description": "A vertical cross-section showing the mineralised lens "
                                               "dipping sixty degrees to the east."}})

    para = ["Further drilling is planned along strike to the south of the ridge."]
    bbox = draw_lines(c, 72, 450, para)
    regions.append({"label": "text", "bbox": bbox, "payload": {"text": para[0]}})
    pages.append({"page_index": 1, "regions": regions})
    c.showPage()
    c.save()

    with open(path + ".fixture.json", "w") as f:
        json.dump({"pages": pages}, f, indent=2)
        f.write("\n")


def text_only():
    """Two pages: three paragraphs on the first, the second blank."""
    path = os.path.join(HERE, "pdf", "text_only.pdf")
    c = new_canvas(path)
    paragraphs = [
        ["Copper prices rose sharply during the second quarter as smelter",
         "output fell across the region."],
        ["Inventories at the exchange warehouses dropped to their lowest",
         "level in four years, tightening the spot market."],
        ["Analysts expect the deficit to narrow once new capacity comes online."],
    ]
    y = 72
    for p in paragraphs:
        draw_lines(c, 72, y, p, size=10, leading=12)
        y += 12 * len(p) + 30
    c.showPage()
    c.showPage()
    c.save()
    with open(os.path.join(HERE, "pdf", "text_only.expected.json"), "w") as f:
        json.dump({"page_count": 2, "paragraphs": [" ".join(p) for p in paragraphs]}, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    os.makedirs(os.path.join(HERE, "corpus"), exist_ok=True)
    os.makedirs(os.path.join(HERE, "pdf"), exist_ok=True)
    assay_report()
    text_only()
