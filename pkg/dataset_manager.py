import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Dict, Sequence

import numpy as np
import pandas as pd
import scipy.io
import scipy.sparse as sp

from exceptions import AsymmetryBeyondTolerance, DimensionMismatch, ParseError
from views import AttributeView, GraphView, MvagDataset, canonical_csr

logger = logging.getLogger(__name__)

MM_HEADER = "%%MatrixMarket"
SYMMETRY_TOL = 1e-12


def atomic_write_text(path: Path, text: str):
    """Write to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


class DatasetManager:
    def __init__(self, config):
        self.config = config

    # -- Matrix Market ---------------------------------------------------

    def read_matrix_market(self, path) -> dict:
        """Parse a Matrix Market file into {'format', 'symmetry', 'shape', 'rows', 'cols', 'values'} or a dense array."""
        path = str(path)
        with open(path, "r") as f:
            lines = f.read().splitlines()
        if not lines or not lines[0].startswith(MM_HEADER):
            raise ParseError(path, 1, "missing %%MatrixMarket header")
        header = lines[0].split()
        if len(header) != 5 or header[1].lower() != "matrix":
            raise ParseError(path, 1, f"unsupported header {lines[0]!r}")
        layout, field, symmetry = (token.lower() for token in header[2:])
        if layout not in ("coordinate", "array"):
            raise ParseError(path, 1, f"unsupported layout {layout!r}")
        if field not in ("real", "integer", "pattern", "double"):
            raise ParseError(path, 1, f"unsupported field {field!r}")
        if symmetry not in ("general", "symmetric"):
            raise ParseError(path, 1, f"unsupported symmetry {symmetry!r}")

        body = [(number, line.strip()) for number, line in enumerate(lines[1:], start=2)
                if line.strip() and not line.lstrip().startswith("%")]
        if not body:
            raise ParseError(path, len(lines), "missing size line")
        size_line, size = body[0]
        try:
            dims = [int(token) for token in size.split()]
        except ValueError:
            raise ParseError(path, size_line, f"bad size line {size!r}") from None

        if layout == "array":
            if len(dims) != 2:
                raise ParseError(path, size_line, "array size line needs rows and columns")
            rows, cols = dims
            if len(body) - 1 != rows * cols:
                raise ParseError(path, size_line, f"expected {rows * cols} values, found {len(body) - 1}")
            values = []
            for number, line in body[1:]:
                try:
                    values.append(float(line.split()[0]))
                except (ValueError, IndexError):
                    raise ParseError(path, number, f"bad value {line!r}") from None
            # array entries are stored column by column
            return {"format": "array", "dense": np.array(values).reshape((cols, rows)).T}

        if len(dims) != 3:
            raise ParseError(path, size_line, "coordinate size line needs rows, columns and entries")
        rows, cols, nnz = dims
        entries = body[1:]
        if len(entries) != nnz:
            raise ParseError(path, size_line, f"expected {nnz} entries, found {len(entries)}")
        r_idx = np.empty(nnz, dtype=np.int64)
        c_idx = np.empty(nnz, dtype=np.int64)
        vals = np.ones(nnz)
        for pos, (number, line) in enumerate(entries):
            tokens = line.split()
            try:
                r_idx[pos] = int(tokens[0]) - 1
                c_idx[pos] = int(tokens[1]) - 1
                if field != "pattern":
                    vals[pos] = float(tokens[2])
            except (ValueError, IndexError):
                raise ParseError(path, number, f"bad entry {line!r}") from None
            if not (0 <= r_idx[pos] < rows and 0 <= c_idx[pos] < cols):
                raise ParseError(path, number, f"index out of range in {line!r}")
        return {"format": "coordinate", "symmetry": symmetry, "shape": (rows, cols),
                "rows": r_idx, "cols": c_idx, "values": vals}

    def _coordinate(self, path, parsed: dict) -> dict:
        if parsed["format"] != "coordinate":
            raise ParseError(str(path), 1, "expected a coordinate Matrix Market file")
        if parsed["shape"][0] != parsed["shape"][1]:
            raise DimensionMismatch(f"{path}: matrix must be square, got {parsed['shape']}")
        return parsed

    def load_graph_view(self, path) -> GraphView:
        """Adjacency from a coordinate file; general files are symmetrized by the max rule."""
        parsed = self._coordinate(path, self.read_matrix_market(path))
        n = parsed["shape"][0]
        rows, cols, vals = parsed["rows"], parsed["cols"], parsed["values"]
        off = rows != cols
        if (~off).any():
            logger.warning("%s: dropping %d self-loops", path, int((~off).sum()))
        rows, cols, vals = rows[off], cols[off], vals[off]
        keep = vals > 0
        if (~keep).any():
            logger.warning("%s: dropping %d non-positive edge weights", path, int((~keep).sum()))
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
        # the max over both stored directions (and duplicates) becomes the undirected weight
        frame = pd.DataFrame({"lo": lo, "hi": hi, "w": vals}).groupby(["lo", "hi"], sort=True)["w"].max()
        lo = frame.index.get_level_values("lo").to_numpy()
        hi = frame.index.get_level_values("hi").to_numpy()
        weights = frame.to_numpy()
        adj = sp.coo_matrix((np.concatenate([weights, weights]),
                             (np.concatenate([lo, hi]), np.concatenate([hi, lo]))), shape=(n, n))
        return GraphView(canonical_csr(adj))

    def load_laplacian(self, path) -> sp.csr_matrix:
        parsed = self._coordinate(path, self.read_matrix_market(path))
        n = parsed["shape"][0]
        rows, cols, vals = parsed["rows"], parsed["cols"], parsed["values"]
        if parsed["symmetry"] == "symmetric":
            off = rows != cols
            rows, cols, vals = (np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]]),
                                np.concatenate([vals, vals[off]]))
        matrix = canonical_csr(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)))
        gap = abs(matrix - matrix.T)
        if gap.nnz and gap.max() > SYMMETRY_TOL:
            raise AsymmetryBeyondTolerance(f"{path}: Laplacian asymmetric by {gap.max():.3e}")
        return matrix

    def save_laplacian(self, matrix: sp.spmatrix, path):
        """Symmetric coordinate Matrix Market holding the lower triangle; 17 digits round-trip every double."""
        lower = sp.tril(sp.csr_matrix(matrix), format="csr")
        lower.sort_indices()
        buffer = io.BytesIO()
        scipy.io.mmwrite(buffer, lower.tocoo(), symmetry="symmetric", precision=17)
        atomic_write_text(path, buffer.getvalue().decode("ascii"))

    def save_graph_view(self, view: GraphView, path):
        self.save_laplacian(view.adjacency, path)

    # -- attributes and labels ------------------------------------------

    def load_attribute_view(self, path) -> AttributeView:
        path = Path(path)
        with open(path, "r") as f:
            first = f.readline()
        if first.startswith(MM_HEADER):
            parsed = self.read_matrix_market(path)
            if parsed["format"] != "array":
                raise ParseError(str(path), 1, "attribute views must use the array layout")
            return AttributeView(parsed["dense"])
        try:
            frame = pd.read_csv(path, header=None, dtype=float)
        except ValueError as exc:
            raise ParseError(str(path), None, f"bad CSV attribute file: {exc}") from None
        return AttributeView(frame.to_numpy())

    def save_attribute_view(self, view: AttributeView, path):
        frame = pd.DataFrame(view.values)
        atomic_write_text(path, frame.to_csv(header=False, index=False, float_format="%.17g"))

    def load_labels(self, path) -> np.ndarray:
        labels = []
        with open(path, "r") as f:
            for number, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    labels.append(int(line))
                except ValueError:
                    raise ParseError(str(path), number, f"bad label {line!r}") from None
        return np.array(labels, dtype=np.int64)

    def save_labels(self, labels: Sequence[int], path):
        atomic_write_text(path, "".join(f"{int(label)}\n" for label in labels))

    # -- manifests -------------------------------------------------------

    def load_dataset(self, manifest_path) -> MvagDataset:
        """Read a dataset manifest; relative paths resolve against the manifest directory."""
        manifest_path = Path(manifest_path)
        try:
            manifest = json.loads(manifest_path.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(str(manifest_path), exc.lineno, exc.msg) from None
        for key in ("name", "n", "k"):
            if key not in manifest:
                raise ParseError(str(manifest_path), None, f"manifest is missing {key!r}")
        base = manifest_path.parent

        def resolve(entry: str) -> Path:
            return base / entry

        n = int(manifest["n"])
        graph_paths = [resolve(entry) for entry in manifest.get("graph_views", [])]
        attribute_entries = [entry if isinstance(entry, dict) else {"path": entry}
                             for entry in manifest.get("attribute_views", [])]
        graph_views = [self.load_graph_view(path) for path in graph_paths]
        attribute_views = [self.load_attribute_view(resolve(entry["path"])) for entry in attribute_entries]
        loaded = list(zip(graph_paths, graph_views)) + \
            [(resolve(e["path"]), v) for e, v in zip(attribute_entries, attribute_views)]
        if loaded:
            first_path, first = loaded[0]
            for path, view in loaded[1:]:
                if view.n != first.n:
                    raise DimensionMismatch(f"{path} has {view.n} nodes but {first_path} has {first.n}")
            if first.n != n:
                raise DimensionMismatch(f"{first_path} has {first.n} nodes but {manifest_path} declares n={n}")

        labels = None
        if manifest.get("labels"):
            labels = self.load_labels(resolve(manifest["labels"]))
        dataset = MvagDataset(
            name=manifest["name"],
            k=int(manifest["k"]),
            graph_views=graph_views,
            attribute_views=attribute_views,
            labels=labels,
            knn_overrides=[entry.get("knn_k") for entry in attribute_entries],
        )
        dataset.validate()
        logger.info("Loaded dataset %s: n=%d, %d graph views, %d attribute views",
                    dataset.name, n, dataset.p, dataset.q)
        return dataset

    def save_dataset(self, ds: MvagDataset, directory) -> Path:
        """Write every view, the labels and a manifest; returns the manifest path."""
        directory = Path(directory)
        manifest: Dict = {"name": ds.name, "n": ds.n, "k": ds.k,
                          "graph_views": [], "attribute_views": []}
        for i, view in enumerate(ds.graph_views):
            name = f"graph_{i + 1}.mtx"
            self.save_graph_view(view, directory / name)
            manifest["graph_views"].append(name)
        for j, view in enumerate(ds.attribute_views):
            name = f"attributes_{j + 1}.csv"
            self.save_attribute_view(view, directory / name)
            entry = {"path": name}
            if j < len(ds.knn_overrides) and ds.knn_overrides[j]:
                entry["knn_k"] = int(ds.knn_overrides[j])
            manifest["attribute_views"].append(entry)
        if ds.labels is not None:
            self.save_labels(ds.labels, directory / "labels.txt")
            manifest["labels"] = "labels.txt"
        manifest_path = directory / "manifest.json"
        atomic_write_text(manifest_path, json.dumps(manifest, indent=2) + "\n")
        return manifest_path

    # -- run artifacts ---------------------------------------------------

    def save_json(self, payload: Dict, path):
        atomic_write_text(path, json.dumps(payload, indent=2) + "\n")

    def save_trace(self, trace, r: int, path):
        """CSV with columns iter, w1..wr, h, evals."""
        columns = ["iter"] + [f"w{i + 1}" for i in range(r)] + ["h", "evals"]
        rows = [[record.iteration, *record.weights.tolist(), record.h, record.evaluations]
                for record in trace]
        frame = pd.DataFrame(rows, columns=columns)
        atomic_write_text(path, frame.to_csv(index=False, float_format="%.17g"))

    def save_embedding(self, embedding: np.ndarray, path):
        frame = pd.DataFrame(embedding)
        atomic_write_text(path, frame.to_csv(header=False, index=False, float_format="%.17g"))

