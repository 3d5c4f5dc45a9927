#!/usr/bin/env python3
"""Writes corpus.jsonl: 1000 short synthetic chemistry documents.

Deterministic (fixed seed). Each document fits in one snippet, so the
ingested store holds exactly 1000 snippets.
"""
import json
import random
from pathlib import Path

HERE = Path(__file__).parent
rng = random.Random(20240917)

mols = []
for line in (HERE / "molecules.tsv").read_text().splitlines():
    if line.startswith("#") or not line.strip():
        continue
    name, smiles = line.split("\t")[:2]
    mols.append((name, smiles))

SOLVENTS = ["ethanol", "methanol", "toluene", "dichloromethane", "water", "acetonitrile",
            "tetrahydrofuran", "dimethylformamide", "ethyl acetate", "hexane"]
SYSTEMS = ["rat liver microsomes", "human plasma", "aqueous buffer", "soil samples",
           "cell culture", "zebrafish embryos", "wastewater", "serum"]
PROPS = ["solubility", "toxicity", "stability", "metabolism", "bioavailability",
         "photodegradation", "binding affinity", "volatility"]
FINDINGS = ["a marked increase", "a modest decrease", "no significant change",
            "a dose-dependent response", "rapid clearance", "slow accumulation"]
TOPICS = [
    ("Noble gases", "The noble gases helium, neon, argon, krypton and xenon have filled valence shells and are chemically inert under most conditions."),
    ("Ideal gas law", "The ideal gas law PV = nRT relates pressure, volume, amount and temperature; R is 8.314 J per mol per K."),
    ("Molarity", "Molarity is the number of moles of solute per litre of solution and is written with the unit mol/L."),
    ("Acids and bases", "A Bronsted acid donates a proton while a Bronsted base accepts one; strong acids dissociate completely in water."),
    ("Enthalpy", "Enthalpy change measures heat absorbed or released at constant pressure; exothermic reactions have negative enthalpy change."),
    ("Le Chatelier", "Le Chatelier's principle states that a system at equilibrium shifts to counteract an imposed change in concentration, pressure or temperature."),
    ("Electronegativity", "Electronegativity increases across a period and decreases down a group; fluorine is the most electronegative element."),
    ("Aromaticity", "Benzene is aromatic: a planar ring of six carbons with six delocalised pi electrons obeying the 4n+2 rule."),
    ("Chirality", "A carbon bonded to four different groups is a stereocentre and the molecule may exist as two non-superimposable enantiomers."),
    ("Reaction rates", "The rate constant rises with temperature as described by the Arrhenius equation k = A exp(-Ea/RT)."),
    ("Oxidation states", "The oxidation state of oxygen is usually -2 and that of hydrogen +1, except in peroxides and metal hydrides."),
    ("Buffers", "A buffer resists pH change and contains a weak acid with its conjugate base; the Henderson-Hasselbalch equation gives its pH."),
    ("Colligative properties", "Boiling point elevation and freezing point depression depend on the number of solute particles, not their identity."),
    ("Hybridisation", "Carbon in methane is sp3 hybridised with tetrahedral geometry and bond angles of about 109.5 degrees."),
    ("Spectroscopy", "Infrared spectroscopy detects carbonyl groups by a strong absorption near 1700 per cm."),
]
ELEMENTS = ["hydrogen", "helium", "lithium", "carbon", "nitrogen", "oxygen", "fluorine", "neon",
            "sodium", "magnesium", "aluminium", "silicon", "phosphorus", "sulfur", "chlorine",
            "argon", "potassium", "calcium", "iron", "copper", "zinc", "bromine", "silver", "iodine", "xenon"]

docs = []


def add(source, ext, title, body):
    docs.append({"source": source, "external_id": ext, "title": title, "body": body})


for i in range(250):
    name, smiles = mols[i % len(mols)]
    rec = {"source": "pubchem", "cid": f"fx{i:04d}", "name": name, "smiles": smiles,
           "synonyms": [f"{name} compound {i}", f"FX-{1000 + i}"]}
    if i % 3 == 0:
        rec["weight"] = round(rng.uniform(30, 500), 2)
    docs.append(rec)

for i in range(200):
    name, smiles = rng.choice(mols)
    prop, system, finding = rng.choice(PROPS), rng.choice(SYSTEMS), rng.choice(FINDINGS)
    add("pubmed", f"pmid{30000000 + i}", f"{prop.capitalize()} of {name} in {system}",
        f"We investigated the {prop} of {name} ({smiles}) in {system}. "
        f"Measurements at {rng.randint(277, 330)} K showed {finding} after {rng.randint(1, 72)} h. "
        f"Study {i} enrolled {rng.randint(8, 400)} samples and reports a half-life of {rng.uniform(0.5, 48):.1f} h.")

for i in range(150):
    (a, sa), (b, sb), (p, sp) = rng.sample(mols, 3)
    solvent = rng.choice(SOLVENTS)
    add("uspto", f"US{9000000 + i}", f"Preparation of {p}",
        f"A mixture of {a} ({sa}) and {b} ({sb}) in {solvent} was stirred at {rng.randint(0, 150)} C "
        f"for {rng.randint(1, 48)} h. Workup gave {p} ({sp}) in {rng.randint(12, 98)}% yield. Example {i}.")

for i in range(150):
    name, smiles = rng.choice(mols)
    prop = rng.choice(PROPS)
    add("semantic_scholar", f"s2-{i:05d}", f"Predicting {prop} with graph models ({i})",
        f"We train a message passing network to predict {prop} from molecular graphs. "
        f"On a benchmark of {rng.randint(500, 20000)} molecules the model reaches an error of "
        f"{rng.uniform(0.1, 1.5):.2f}. A case study on {name} ({smiles}) illustrates the learned attention.")

for i in range(150):
    title, text = TOPICS[i % len(TOPICS)]
    add("openstax", f"ox-{i:04d}", f"{title}, section {i // len(TOPICS) + 1}",
        f"{text} Exercise {i}: apply this to {rng.choice(ELEMENTS)} and {rng.choice(SOLVENTS)} "
        f"at {rng.randint(250, 400)} K.")

for i in range(100):
    el = ELEMENTS[i % len(ELEMENTS)]
    z = ELEMENTS.index(el) + 1
    add("wikipedia", f"wiki-{i:04d}", el.capitalize(),
        f"{el.capitalize()} is a chemical element listed in this fixture with index {z}. "
        f"Article revision {i} notes its use in {rng.choice(SOLVENTS)} chemistry and "
        f"{rng.choice(PROPS)} studies.")

assert len(docs) == 1000
with open(HERE / "corpus.jsonl", "w") as f:
    for d in docs:
        f.write(json.dumps(d, sort_keys=True) + "\n")
print(f"wrote {len(docs)} documents")
