#!/usr/bin/env python3
"""Regenerates data/sample.conllu and data/sample_unimorph.tsv.

The sample is a synthetic, mostly-grammatical corpus over an artificial
vocabulary with fully regular inflection, annotated with SUD-style relations
(subj, mod, det, comp:obj, comp:aux, udep). A small, controlled amount of
agreement noise keeps per-rule satisfaction ratios realistic (between 0.9
and 1.0). The companion lexicon lists every paradigm used by the corpus so
perturbation can reach every sentence.

Deterministic: regenerating produces byte-identical files.
"""

import random
from pathlib import Path

SEED = 20230415
N_SENTENCES = 1000

CONSONANTS = "bdfgklmnprstvz"
VOWELS = "aeiou"

CASES = ["Nom", "Acc", "Dat", "Gen"]
NUMBERS = ["Sing", "Plur"]
GENDERS = ["Masc", "Fem", "Neut"]
PERSONS = ["1", "2", "3"]

CASE_NUM_SUFFIX = {
    ("Nom", "Sing"): "",
    ("Acc", "Sing"): "n",
    ("Dat", "Sing"): "ra",
    ("Gen", "Sing"): "sa",
    ("Nom", "Plur"): "i",
    ("Acc", "Plur"): "in",
    ("Dat", "Plur"): "ira",
    ("Gen", "Plur"): "isa",
}
GENDER_MARKER = {"Masc": "o", "Fem": "e", "Neut": "u"}
VERB_ENDING = {
    ("1", "Sing"): "am",
    ("2", "Sing"): "at",
    ("3", "Sing"): "as",
    ("1", "Plur"): "um",
    ("2", "Plur"): "ut",
    ("3", "Plur"): "us",
}
UM_CASE = {"Nom": "NOM", "Acc": "ACC", "Dat": "DAT", "Gen": "GEN"}
UM_NUM = {"Sing": "SG", "Plur": "PL"}
UM_GENDER = {"Masc": "MASC", "Fem": "FEM", "Neut": "NEUT"}

PRONOUNS = {
    # (person, number) -> {case: form}
    ("1", "Sing"): {"Nom": "jo", "Acc": "jon"},
    ("2", "Sing"): {"Nom": "tu", "Acc": "tun"},
    ("3", "Sing"): {"Nom": "el", "Acc": "eln"},
    ("1", "Plur"): {"Nom": "nos", "Acc": "nosn"},
    ("2", "Plur"): {"Nom": "vos", "Acc": "vosn"},
    ("3", "Plur"): {"Nom": "zey", "Acc": "zeyn"},
}


def make_stems(rng, count, used):
    stems = []
    while len(stems) < count:
        syllables = rng.randint(2, 3)
        stem = "".join(
            rng.choice(CONSONANTS) + rng.choice(VOWELS) for _ in range(syllables)
        )
        if stem not in used:
            used.add(stem)
            stems.append(stem)
    return stems


def noun_form(stem, case, number):
    return stem + CASE_NUM_SUFFIX[(case, number)]


def adj_form(stem, gender, case, number):
    return stem + GENDER_MARKER[gender] + CASE_NUM_SUFFIX[(case, number)]


def verb_form(stem, person, number):
    return stem + VERB_ENDING[(person, number)]


def main():
    rng = random.Random(SEED)
    used = set()
    noun_stems = make_stems(rng, 60, used)
    adj_stems = make_stems(rng, 25, used)
    verb_stems = make_stems(rng, 20, used)
    noun_gender = {stem: GENDERS[i % 3] for i, stem in enumerate(noun_stems)}
    det_stem = "da"
    aux_stem = "ver"

    def pick_noun():
        return rng.choice(noun_stems)

    def weighted(pairs):
        values = [v for v, _ in pairs]
        weights = [w for _, w in pairs]
        return rng.choices(values, weights=weights, k=1)[0]

    rows_out = []

    def token(idx, form, lemma, upos, feats, head, deprel):
        feat_col = (
            "|".join(f"{k}={v}" for k, v in sorted(feats.items())) if feats else "_"
        )
        return f"{idx}\t{form}\t{lemma}\t{upos}\t_\t{feat_col}\t{head}\t{deprel}\t_\t_"

    def noun_token(idx, stem, case, number, head, deprel):
        gender = noun_gender[stem]
        feats = {"Case": case, "Gender": gender, "Number": number}
        return token(idx, noun_form(stem, case, number), stem, "NOUN", feats, head, deprel)

    def det_token(idx, gender, case, number, head):
        feats = {"Case": case, "Gender": gender, "Number": number}
        return token(idx, adj_form(det_stem, gender, case, number), det_stem, "DET", feats, head, "det")

    def adj_token(idx, stem, gender, case, number, head):
        feats = {"Case": case, "Gender": gender, "Number": number}
        return token(idx, adj_form(stem, gender, case, number), stem, "ADJ", feats, head, "mod")

    def agree_or_noise(value, pool, p_noise):
        if rng.random() < p_noise:
            alternatives = [v for v in pool if v != value]
            return rng.choice(alternatives)
        return value

    obj_case_dist = [("Acc", 0.92), ("Nom", 0.06), ("Dat", 0.013), ("Gen", 0.007)]
    subj_case_dist = [("Nom", 0.97), ("Acc", 0.03)]
    udep_case_dist = [("Dat", 0.55), ("Gen", 0.45)]

    def udep_noun(idx, head):
        return noun_token(idx, pick_noun(), weighted(udep_case_dist), rng.choice(NUMBERS), head, "udep")

    for i in range(N_SENTENCES):
        template = [1, 1, 1, 1, 2, 2, 2, 3, 3, 3][i % 10]
        lines = []
        if template == 1:
            # PRON subj + AUX root + DET ADJ NOUN obj of infinitive + 2 oblique nouns
            person = rng.choice(PERSONS)
            number = rng.choice(NUMBERS)
            pron_lemma = PRONOUNS[(person, number)]["Nom"]
            pron = pron_lemma
            aux_person = agree_or_noise(person, PERSONS, 0.01)
            aux_number = agree_or_noise(number, NUMBERS, 0.015)
            obj_stem = pick_noun()
            obj_case = weighted(obj_case_dist)
            obj_number = rng.choice(NUMBERS)
            obj_gender = noun_gender[obj_stem]
            det_case = agree_or_noise(obj_case, CASES, 0.02)
            det_gender = agree_or_noise(obj_gender, GENDERS, 0.01)
            det_number = agree_or_noise(obj_number, NUMBERS, 0.01)
            adj_stem = rng.choice(adj_stems)
            adj_case = agree_or_noise(obj_case, CASES, 0.02)
            adj_gender = agree_or_noise(obj_gender, GENDERS, 0.01)
            adj_number = agree_or_noise(obj_number, NUMBERS, 0.01)
            verb_stem = rng.choice(verb_stems)
            lines.append(token(1, pron, pron_lemma, "PRON",
                               {"Case": "Nom", "Number": number, "Person": person}, 2, "subj"))
            lines.append(token(2, verb_form(aux_stem, aux_person, aux_number), aux_stem, "AUX",
                               {"Number": aux_number, "Person": aux_person}, 0, "root"))
            lines.append(det_token(3, det_gender, det_case, det_number, 5))
            lines.append(adj_token(4, adj_stem, adj_gender, adj_case, adj_number, 5))
            lines.append(noun_token(5, obj_stem, obj_case, obj_number, 6, "comp:obj"))
            lines.append(token(6, verb_stem + "ei", verb_stem, "VERB", {"VerbForm": "Inf"}, 2, "comp:aux"))
            lines.append(udep_noun(7, 2))
            lines.append(udep_noun(8, 2))
            lines.append(token(9, ".", ".", "PUNCT", {}, 2, "punct"))
        elif template == 2:
            # DET NOUN subj + finite VERB root + 2 oblique nouns
            subj_stem = pick_noun()
            subj_case = weighted(subj_case_dist)
            subj_number = rng.choice(NUMBERS)
            subj_gender = noun_gender[subj_stem]
            det_case = agree_or_noise(subj_case, CASES, 0.02)
            det_gender = agree_or_noise(subj_gender, GENDERS, 0.01)
            det_number = agree_or_noise(subj_number, NUMBERS, 0.01)
            verb_stem = rng.choice(verb_stems)
            verb_number = agree_or_noise(subj_number, NUMBERS, 0.025)
            lines.append(det_token(1, det_gender, det_case, det_number, 2))
            lines.append(noun_token(2, subj_stem, subj_case, subj_number, 3, "subj"))
            lines.append(token(3, verb_form(verb_stem, "3", verb_number), verb_stem, "VERB",
                               {"Number": verb_number, "Person": "3", "VerbForm": "Fin"}, 0, "root"))
            lines.append(udep_noun(4, 3))
            lines.append(udep_noun(5, 3))
            lines.append(token(6, ".", ".", "PUNCT", {}, 3, "punct"))
        else:
            # NOUN subj + finite VERB root + DET ADJ NOUN obj + PRON and NOUN obliques
            subj_stem = pick_noun()
            subj_case = weighted(subj_case_dist)
            subj_number = rng.choice(NUMBERS)
            verb_stem = rng.choice(verb_stems)
            verb_number = agree_or_noise(subj_number, NUMBERS, 0.025)
            obj_stem = pick_noun()
            obj_case = weighted(obj_case_dist)
            obj_number = rng.choice(NUMBERS)
            obj_gender = noun_gender[obj_stem]
            det_case = agree_or_noise(obj_case, CASES, 0.02)
            det_gender = agree_or_noise(obj_gender, GENDERS, 0.01)
            det_number = agree_or_noise(obj_number, NUMBERS, 0.01)
            adj_stem = rng.choice(adj_stems)
            adj_case = agree_or_noise(obj_case, CASES, 0.02)
            adj_gender = agree_or_noise(obj_gender, GENDERS, 0.01)
            adj_number = agree_or_noise(obj_number, NUMBERS, 0.01)
            pron_person = rng.choice(PERSONS)
            pron_number = rng.choice(NUMBERS)
            pron_lemma = PRONOUNS[(pron_person, pron_number)]["Nom"]
            pron = PRONOUNS[(pron_person, pron_number)]["Acc"]
            lines.append(noun_token(1, subj_stem, subj_case, subj_number, 2, "subj"))
            lines.append(token(2, verb_form(verb_stem, "3", verb_number), verb_stem, "VERB",
                               {"Number": verb_number, "Person": "3", "VerbForm": "Fin"}, 0, "root"))
            lines.append(det_token(3, det_gender, det_case, det_number, 5))
            lines.append(adj_token(4, adj_stem, adj_gender, adj_case, adj_number, 5))
            lines.append(noun_token(5, obj_stem, obj_case, obj_number, 2, "comp:obj"))
            lines.append(token(6, pron, pron_lemma, "PRON",
                               {"Case": "Acc", "Number": pron_number, "Person": pron_person}, 2, "udep"))
            lines.append(udep_noun(7, 2))
            lines.append(token(8, ".", ".", "PUNCT", {}, 2, "punct"))

        forms = [line.split("\t")[1] for line in lines]
        text = " ".join(forms[:-1]) + forms[-1]
        rows_out.append(f"# sent_id = sample-{i + 1:04d}")
        rows_out.append(f"# text = {text}")
        rows_out.extend(lines)
        rows_out.append("")

    root = Path(__file__).resolve().parent.parent
    (root / "data" / "sample.conllu").write_text("\n".join(rows_out) + "\n", encoding="utf-8")

    lex_rows = []
    for stem in noun_stems:
        g = UM_GENDER[noun_gender[stem]]
        for case in CASES:
            for number in NUMBERS:
                lex_rows.append(
                    f"{stem}\t{noun_form(stem, case, number)}\tN;{g};{UM_CASE[case]};{UM_NUM[number]}"
                )
    for stem in adj_stems + [det_stem]:
        pos = "DET" if stem == det_stem else "ADJ"
        for gender in GENDERS:
            for case in CASES:
                for number in NUMBERS:
                    lex_rows.append(
                        f"{stem}\t{adj_form(stem, gender, case, number)}\t{pos};{UM_GENDER[gender]};{UM_CASE[case]};{UM_NUM[number]}"
                    )
    for stem in verb_stems:
        for person in PERSONS:
            for number in NUMBERS:
                lex_rows.append(
                    f"{stem}\t{verb_form(stem, person, number)}\tV;FIN;{person};{UM_NUM[number]}"
                )
        lex_rows.append(f"{stem}\t{stem}ei\tV;NFIN")
    for person in PERSONS:
        for number in NUMBERS:
            lex_rows.append(
                f"{aux_stem}\t{verb_form(aux_stem, person, number)}\tAUX;{person};{UM_NUM[number]}"
            )
    for (person, number), forms in PRONOUNS.items():
        lemma = forms["Nom"]
        for case, form in forms.items():
            lex_rows.append(
                f"{lemma}\t{form}\tPRO;{person};{UM_NUM[number]};{UM_CASE[case]}"
            )
    (root / "data" / "sample_unimorph.tsv").write_text(
        "\n".join(lex_rows) + "\n", encoding="utf-8"
    )
    print(f"wrote {N_SENTENCES} sentences, {len(lex_rows)} lexicon rows")


if __name__ == "__main__":
    main()
