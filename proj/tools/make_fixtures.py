#!/usr/bin/env python3
"""Regenerates the bundled knowledge-base and page dumps under data/fixtures.

Page text is written with [[surface|item-id]] anchor markup; this script
strips the markup and records anchor offsets in Unicode scalar values.
"""

import json
import pathlib
import re

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "fixtures"

MOLDOVA = "state award of the Republic of Moldova"

KB = [
    # people
    ("Q1", "J.K. Rowling", ["Rowling", "Joanne Rowling"], ["human"], [], ["writer", "novelist"]),
    ("Q2", "Charles Dickens", ["Dickens"], ["human"], [], ["writer", "novelist"]),
    ("Q3", "Jane Austen", ["Austen"], ["human"], [], ["writer", "novelist"]),
    ("Q4", "Mark Twain", ["Twain"], ["human"], [], ["writer", "journalist"]),
    ("Q5", "Virginia Woolf", ["Woolf"], ["human"], [], ["writer", "novelist"]),
    ("Q6", "Ludwig van Beethoven", ["Beethoven"], ["human"], [], ["Q900", "pianist"]),
    ("Q7", "Wolfgang Amadeus Mozart", ["Mozart"], ["human"], [], ["Q900", "pianist"]),
    ("Q8", "Steve Jobs", ["Jobs"], ["human"], [], ["businessperson", "Chief Executive Officer"]),
    ("Q9", "Angela Merkel", ["Merkel"], ["human"], [], ["politician"]),
    ("Q10", "Winston Churchill", ["Churchill"], ["human"], [], ["politician", "writer"]),
    ("Q11", "Barack Obama", ["Obama"], ["human"], [], ["politician", "lawyer"]),
    ("Q12", "Abraham Lincoln", ["Lincoln"], ["human"], [], ["politician", "lawyer"]),
    ("Q13", "Marie Curie", ["Curie"], ["human"], [], ["physicist", "chemist"]),
    ("Q14", "Albert Einstein", ["Einstein"], ["human"], [], ["physicist"]),
    ("Q15", "Helmut Kohl", ["Kohl"], ["human"], [], ["politician"]),
    # places
    ("Q20", "London", [], ["city", "capital"], [], []),
    ("Q21", "Edinburgh", [], ["city"], [], []),
    ("Q22", "Paris", [], ["city", "capital"], [], []),
    ("Q23", "Beijing", [], ["city", "capital"], [], []),
    ("Q24", "Berlin", [], ["city", "capital"], [], []),
    ("Q25", "Vienna", [], ["city", "capital"], [], []),
    ("Q26", "Washington", [], ["city", "capital"], [], []),
    ("Q27", "Bonn", [], ["city"], [], []),
    ("Q28", "Chicago", [], ["city"], [], []),
    ("Q29", "Yate", [], [], [], []),
    ("Q30", "United Kingdom", ["Britain"], ["country", "sovereign state"], [], []),
    ("Q31", "France", [], ["country", "sovereign state"], [], []),
    ("Q32", "China", [], ["country", "sovereign state"], [], []),
    ("Q33", "Germany", [], ["country", "sovereign state"], [], []),
    ("Q34", "Austria", [], ["country", "sovereign state"], [], []),
    ("Q35", "United States", ["America"], ["country", "sovereign state"], [], []),
    # works
    ("Q40", "Harry Potter", [], ["book series"], ["literary work"], []),
    ("Q41", "Oliver Twist", [], ["novel"], ["literary work"], []),
    ("Q42", "Pride and Prejudice", [], ["novel"], ["literary work"], []),
    ("Q43", "Great Expectations", [], ["novel"], ["literary work"], []),
    ("Q44", "Emma", [], ["novel"], ["literary work"], []),
    ("Q45", "Mrs Dalloway", [], ["novel"], ["literary work"], []),
    ("Q46", "Adventures of Huckleberry Finn", [], ["novel"], [], []),
    # organisations
    ("Q50", "Bloomsbury", [], ["publisher", "company"], [], []),
    ("Q51", "Penguin Books", [], ["publisher", "company"], [], []),
    ("Q52", "Scholastic", [], ["publisher", "company"], [], []),
    ("Q53", "Chapman & Hall", [], ["publisher"], [], []),
    ("Q54", "HarperCollins", [], ["publisher", "company"], [], []),
    ("Q55", "Apple", [], ["company", "technology company"], [], []),
    # awards (truncated to "state award")
    ("Q60", "Order of the Republic", [], [MOLDOVA], [], []),
    ("Q61", "Order of Stefan cel Mare", [], [MOLDOVA], [], []),
    ("Q62", "Order of Work Glory", [], [MOLDOVA], [], []),
    ("Q63", "Order of Honour", [], [MOLDOVA], [], []),
    ("Q64", "Medal for Civic Merit", [], [MOLDOVA], [], []),
    # fewer than five instances: dropped from the dictionary
    ("Q70", "Flora family", [], ["asteroid family"], [], []),
    ("Q71", "Vesta family", [], ["asteroid family"], [], []),
    ("Q72", "Eos family", [], ["asteroid family"], [], []),
    ("Q73", "Themis family", [], ["asteroid family"], [], []),
    # referenced by id from occupation claims
    ("Q900", "Composer", [], ["occupation"], [], []),
    ("Q901", "Thornbury Castle", [], [], [], []),
]

PAGES = [
    ("J.K. Rowling", [
        "J.K. Rowling is a British author.",
        "She wrote [[Harry Potter|Q40]] in [[Edinburgh|Q21]].",
        "The books were published by [[Bloomsbury|Q50]] in [[London|Q20]].",
        "Her early life was quiet.",
    ]),
    ("Charles Dickens", [
        "Charles Dickens was an English writer.",
        "Dickens wrote [[Oliver Twist|Q41]] and [[Great Expectations|Q43]].",
        "He lived in [[London|Q20]] for most of his life.",
        "His novels were published by [[Chapman & Hall|Q53]].",
        "Dickens remains widely read.",
    ]),
    ("Jane Austen", [
        "Jane Austen wrote [[Pride and Prejudice|Q42]] and [[Emma|Q44]].",
        "Austen spent several years in Bath.",
        "Her work is admired in [[France|Q31]] and the [[United States|Q35]].",
    ]),
    ("Mark Twain", [
        "Mark Twain wrote [[Adventures of Huckleberry Finn|Q46]].",
        "Twain worked as a journalist before he wrote novels.",
        "He lectured in [[Vienna|Q25]] and [[London|Q20]].",
    ]),
    ("Virginia Woolf", [
        "Virginia Woolf published [[Mrs Dalloway|Q45]] in 1925.",
        "Woolf lived in [[London|Q20]].",
        "The weather that year was mild.",
    ]),
    ("Ludwig van Beethoven", [
        "Ludwig van Beethoven was born in [[Bonn|Q27]].",
        "Beethoven moved to [[Vienna|Q25]] as a young man.",
        "Beethoven admired [[Wolfgang Amadeus Mozart|Q7]].",
    ]),
    ("Wolfgang Amadeus Mozart", [
        "Mozart was born in Salzburg.",
        "He performed in [[Paris|Q22]] and [[Vienna|Q25]].",
        "Mozart wrote more than six hundred works.",
    ]),
    ("Steve Jobs", [
        "Steve Jobs co-founded [[Apple|Q55]].",
        "Jobs introduced many products in the [[United States|Q35]].",
        "The company grew quickly.",
    ]),
    ("Angela Merkel", [
        "Angela Merkel served as chancellor of [[Germany|Q33]].",
        "Merkel lived in [[Berlin|Q24]].",
        "She was succeeded by Olaf Scholz.",
    ]),
    ("Winston Churchill", [
        "Winston Churchill led the [[United Kingdom|Q30]] during the war.",
        "Churchill wrote many books in [[London|Q20]].",
        "He also painted landscapes.",
    ]),
    ("Barack Obama", [
        "Barack Obama was president of the [[United States|Q35]].",
        "Obama taught law in [[Chicago|Q28]].",
        "Dr. Kohl came to [[Washington|Q26]] to meet him.",
    ]),
    ("Abraham Lincoln", [
        "Abraham Lincoln was a lawyer before he entered politics.",
        "Lincoln moved to [[Washington|Q26]] in 1861.",
        "The war ended in 1865.",
    ]),
    ("Marie Curie", [
        "Marie Curie worked in [[Paris|Q22]].",
        "Curie was born in Warsaw.",
        "She studied radioactivity with [[Albert Einstein|Q14]] as a correspondent.",
    ]),
    ("Albert Einstein", [
        "Albert Einstein was born in [[Germany|Q33]].",
        "Einstein worked in [[Berlin|Q24]] and later in the [[United States|Q35]].",
        "He is known for relativity.",
    ]),
    ("Helmut Kohl", [
        "Helmut Kohl was chancellor of [[Germany|Q33]].",
        "Kohl was born near [[Bonn|Q27]].",
        "Dr. Kohl came to [[Beijing|Q23]] in 1984.",
    ]),
    ("London", [
        "London is the capital of the [[United Kingdom|Q30]].",
        "London hosts many museums.",
        "[[Charles Dickens|Q2]] described London in detail.",
    ]),
    ("Paris", [
        "Paris is the capital of [[France|Q31]].",
        "Paris was home to [[Marie Curie|Q13]].",
    ]),
    ("Beijing", [
        "Beijing is the capital of [[China|Q32]].",
        "Beijing hosted the Olympic Games in 2008.",
        "Many visitors come each year.",
    ]),
    ("Vienna", [
        "Vienna is the capital of [[Austria|Q34]].",
        "[[Mozart|Q7]] and [[Beethoven|Q6]] worked in Vienna.",
    ]),
    ("Bloomsbury", [
        "Bloomsbury is a publisher based in [[London|Q20]].",
        "Bloomsbury published [[Harry Potter|Q40]].",
        "It competes with [[Penguin Books|Q51]] and [[HarperCollins|Q54]].",
    ]),
    ("Order of the Republic", [
        "The Order of the Republic is the highest award of Moldova.",
        "Holders include people from [[Thornbury Castle|Q901]] and [[Yate|Q29]].",
        "It ranks above the [[Order of Honour|Q63]].",
    ]),
    ("Yate", [
        "Yate is a town near Bristol.",
        "[[J.K. Rowling|Q1]] was born in Yate.",
        "The [[Flora family|Q70]] is unrelated; see also [[Nowhere|Q999]].",
    ]),
]


def strip_markup(sentence):
    anchors = []
    out = []
    pos = 0
    for m in re.finditer(r"\[\[([^|\]]+)\|([^\]]+)\]\]", sentence):
        out.append(sentence[pos:m.start()])
        offset = sum(len(s) for s in out)
        anchors.append((m.group(1), m.group(2), offset))
        out.append(m.group(1))
        pos = m.end()
    out.append(sentence[pos:])
    return "".join(out), anchors


def build_page(title, sentences):
    text = ""
    anchors = []
    for s in sentences:
        if text:
            text += " "
        plain, local = strip_markup(s)
        for surface, target, off in local:
            anchors.append({"surface": surface, "target": target, "offset": len(text) + off})
        text += plain
    for a in anchors:
        assert text[a["offset"]:a["offset"] + len(a["surface"])] == a["surface"]
    return {"title": title, "text": text, "anchors": anchors}


def dumps(obj):
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "kb.jsonl", "w", encoding="utf-8", newline="\n") as f:
        for qid, label, aliases, inst, sub, occ in KB:
            f.write(dumps({"id": qid, "label": label, "aliases": aliases,
                           "instance_of": inst, "subclass_of": sub,
                           "occupation": occ}) + "\n")
        # malformed records, skipped and counted by the builder
        f.write('{"id": 17}\n')
        f.write("not json\n")
    pages = [build_page(t, s) for t, s in PAGES]
    with open(OUT / "pages.jsonl", "w", encoding="utf-8", newline="\n") as f:
        for p in pages:
            f.write(dumps(p) + "\n")
    with open(OUT / "rowling.json", "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(pages[0], ensure_ascii=False, indent=2) + "\n")


if __name__ == "__main__":
    main()
