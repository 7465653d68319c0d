"""Tab-separated file formats: evidence, targets, scores, gold, reports.

Evidence rows: predicate, one column per argument, value in [0,1].
Target rows: the same without the value column.
Score rows: written as scored atoms (predicate, args..., score); read back
either in that form or as bare (user, characteristic, score) triples.
Gold rows: user, characteristic, 0-or-1 label.

All writers emit UTF-8, newline-terminated, with float values rendered via
repr (shortest round-trip), so identical data means identical bytes.
"""

from collections import defaultdict

from .errors import DataError
from .ground import EvidenceDB
from .logic import GroundAtom
from .profiles import CHARACTERISTICS, ProfileEvidence

_VALUE_SLACK = 1e-9  # float dust from upstream writers is forgiven, no more


def _parse_value(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{where}: bad value {text!r}") from None
    if value != value or not (-_VALUE_SLACK <= value <= 1.0 + _VALUE_SLACK):
        raise DataError(f"{where}: value {text!r} outside [0, 1]")
    return min(max(value, 0.0), 1.0)


def _rows(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            yield line_no, line.split("\t")


def read_evidence(path) -> dict:
    """Observed atoms from an evidence TSV: {GroundAtom: value}."""
    observed = {}
    for line_no, fields in _rows(path):
        if len(fields) < 3:
            raise DataError(f"{path}:{line_no}: need predicate, args, value")
        atom = GroundAtom(fields[0], tuple(fields[1:-1]))
        value = _parse_value(fields[-1], f"{path}:{line_no}")
        if atom in observed and observed[atom] != value:
            raise DataError(f"{path}:{line_no}: conflicting values for {atom}")
        observed[atom] = value
    return observed


def read_targets(path) -> list:
    targets = []
    for line_no, fields in _rows(path):
        if len(fields) < 2:
            raise DataError(f"{path}:{line_no}: need predicate and args")
        targets.append(GroundAtom(fields[0], tuple(fields[1:])))
    return targets


def read_evidence_db(evidence_path, targets_path) -> EvidenceDB:
    return EvidenceDB(read_evidence(evidence_path), read_targets(targets_path))


def write_evidence(path, observed) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for atom in sorted(observed):
            value = observed[atom]
            fh.write(f"{atom.predicate}\t" + "\t".join(atom.args) + f"\t{value!r}\n")


def write_targets(path, targets) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for atom in sorted(targets):
            fh.write(f"{atom.predicate}\t" + "\t".join(atom.args) + "\n")


def write_scores(path, assignment) -> None:
    """Scored atoms, canonically ordered."""
    with open(path, "w", encoding="utf-8") as fh:
        for atom in sorted(dict(assignment.items())):
            fh.write(
                f"{atom.predicate}\t" + "\t".join(atom.args) + f"\t{assignment[atom]!r}\n"
            )


def read_scores(path) -> dict:
    """(user, characteristic) -> score.

    Accepts bare triples `user TAB characteristic TAB score` or scored-atom
    rows from `infer` (predicate, args..., score); atom rows contribute only
    two-argument predicates, read as (user, characteristic).
    """
    scores = {}
    for line_no, fields in _rows(path):
        if len(fields) == 3:
            user, char, raw = fields
        elif len(fields) == 4:
            _, user, char, raw = fields
        else:
            continue
        if char not in CHARACTERISTICS and len(fields) == 3:
            raise DataError(f"{path}:{line_no}: unknown characteristic {char!r}")
        if char not in CHARACTERISTICS:
            continue
        scores[(user, char)] = _parse_value(raw, f"{path}:{line_no}")
    if not scores:
        raise DataError(f"{path}: no usable score rows")
    return scores


def write_user_scores(path, scores: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for user, char in sorted(scores):
            fh.write(f"{user}\t{char}\t{scores[(user, char)]!r}\n")


def read_gold(path) -> dict:
    gold = {}
    for line_no, fields in _rows(path):
        if len(fields) != 3:
            raise DataError(f"{path}:{line_no}: need user, characteristic, label")
        user, char, raw = fields
        if char not in CHARACTERISTICS:
            raise DataError(f"{path}:{line_no}: unknown characteristic {char!r}")
        if raw not in ("0", "1"):
            raise DataError(f"{path}:{line_no}: label must be 0 or 1")
        gold[(user, char)] = int(raw)
    if not gold:
        raise DataError(f"{path}: no gold rows")
    return gold


def write_gold(path, gold: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for user, char in sorted(gold):
            fh.write(f"{user}\t{char}\t{gold[(user, char)]}\n")


def evidence_rows_from_profile(ev: ProfileEvidence) -> dict:
    """Flatten ProfileEvidence into evidence-TSV atoms (without guards)."""
    observed = {}
    for (user, char, source), score in ev.predicts.items():
        observed[GroundAtom("Predicts", (user, char, source))] = score
    for (user, page), value in ev.likes.items():
        observed[GroundAtom("Likes", (user, page))] = value
    for (user, char), label in ev.known_traits.items():
        observed[GroundAtom("Is", (user, char))] = float(label)
    return observed


def profile_from_evidence_rows(observed) -> ProfileEvidence:
    """Rebuild ProfileEvidence from evidence-TSV atoms."""
    predicts, likes, known = {}, {}, {}
    for atom, value in observed.items():
        if atom.predicate == "Predicts" and len(atom.args) == 3:
            predicts[tuple(atom.args)] = value
        elif atom.predicate == "Likes" and len(atom.args) == 2:
            likes[tuple(atom.args)] = value
        elif atom.predicate == "Is" and len(atom.args) == 2:
            if value not in (0.0, 1.0):
                raise DataError(f"known trait {atom} must be 0 or 1")
            known[tuple(atom.args)] = int(value)
        elif atom.predicate in ("User", "Item", "Average"):
            continue  # derived guards; recomputed on assembly
        else:
            raise DataError(f"unexpected evidence atom {atom}")
    return ProfileEvidence(predicts=predicts, likes=likes, known_traits=known)


def filter_page_degree(likes: dict, min_page_likes: int) -> dict:
    """Drop pages liked by fewer than min_page_likes users."""
    if min_page_likes <= 1:
        return dict(likes)
    degree = defaultdict(int)
    for (_, page) in likes:
        degree[page] += 1
    return {
        (u, p): v for (u, p), v in likes.items() if degree[p] >= min_page_likes
    }


def format_report_tsv(report) -> str:
    """ExperimentReport rows as a fixed-column TSV."""
    lines = ["characteristic\tfold\taccuracy\tauc\tpr_pos\tpr_neg\tn_pos\tn_neg"]
    for row in report.table_rows():
        rendered = []
        for cell in row:
            if cell is None:
                rendered.append("undefined")
            elif isinstance(cell, float):
                rendered.append(repr(cell))
            else:
                rendered.append(str(cell))
        lines.append("\t".join(rendered))
    return "\n".join(lines) + "\n"


def format_metrics_tsv(report) -> str:
    """MetricsReport (single evaluation) as a fixed-column TSV."""
    lines = ["characteristic\taccuracy\tauc\tpr_pos\tpr_neg\tn_pos\tn_neg"]
    for char in report.characteristics():
        m = report[char]
        cells = [char]
        for value in (m.accuracy, m.auc, m.pr_pos, m.pr_neg):
            cells.append("undefined" if value is None else repr(value))
        cells.extend([str(m.n_pos), str(m.n_neg)])
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
