import csv
import json
import numpy as np
from typing import Any, Dict, List, Optional, Sequence, TextIO, Tuple
from utils.config import load_config

DIGITS = load_config()["output"]["digits"]


def _fmt(x: float) -> str:
    return f"{x:.{DIGITS}g}"


def dump_csv(
    f: TextIO,
    ids: Sequence[int],
    labels: Sequence[int],
    vectors: np.ndarray,
    columns: Sequence[str],
    manifest: Optional[str] = None,
) -> None:
    """A `# manifest:` comment, a header row, then one `id, label, coordinates...` row per graph."""
    if manifest:
        f.write(f"# manifest: {manifest}\n")
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(["id", "label", *columns])
    for i, lab, vec in zip(ids, labels, vectors):
        writer.writerow([int(i), int(lab), *(_fmt(x) for x in vec)])


def embedding_document(
    ids: Sequence[int],
    labels: Sequence[int],
    vectors: np.ndarray,
    columns: Sequence[str],
    manifest: Optional[str] = None,
) -> Dict[str, Any]:
    graphs = [
        {"id": int(i), "label": int(lab), "vector": [float(_fmt(x)) for x in vec]}
        for i, lab, vec in zip(ids, labels, vectors)
    ]
    return {"manifest": manifest, "columns": list(columns), "graphs": graphs}


def dump_json(
    f: TextIO,
    ids: Sequence[int],
    labels: Sequence[int],
    vectors: np.ndarray,
    columns: Sequence[str],
    manifest: Optional[str] = None,
) -> None:
    json.dump(embedding_document(ids, labels, vectors, columns, manifest), f)
    f.write("\n")


def write_embeddings(
    path: str,
    fmt: str,
    ids: Sequence[int],
    labels: Sequence[int],
    vectors: np.ndarray,
    columns: Sequence[str],
    manifest: Optional[str] = None,
) -> None:
    """
    Writes one record per graph. Reals are printed with 17 significant digits so reading them back
    gives the same doubles.

    Args:
        - path (str): output file
        - fmt (str): "csv", or "json" for an object holding the manifest name, the column names and a
            list of {id, label, vector}
        - manifest (str): file name of the run manifest that produced the vectors
    """
    if fmt == "csv":
        with open(path, "w", newline="") as f:
            dump_csv(f, ids, labels, vectors, columns, manifest)
    elif fmt == "json":
        with open(path, "w") as f:
            dump_json(f, ids, labels, vectors, columns, manifest)
    else:
        raise ValueError(f"unknown output format {fmt!r}")


def read_embeddings(path: str) -> Tuple[List[int], List[int], np.ndarray]:
    """Reads back a file written by `write_embeddings`; the format follows the extension."""
    if path.endswith(".json"):
        with open(path, "r") as f:
            doc = json.load(f)
        graphs = doc["graphs"]
        width = len(doc["columns"])
        vectors = np.array([g["vector"] for g in graphs], dtype=float).reshape(len(graphs), width)
        return [g["id"] for g in graphs], [g["label"] for g in graphs], vectors

    with open(path, "r", newline="") as f:
        rows = list(csv.reader(line for line in f if not line.startswith("#")))
    header, body = rows[0], rows[1:]
    vectors = np.array([[float(x) for x in r[2:]] for r in body], dtype=float).reshape(len(body), len(header) - 2)
    return [int(r[0]) for r in body], [int(r[1]) for r in body], vectors
