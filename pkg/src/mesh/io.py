"""
Mesh file reader and writer for OBJ and OFF
"""

import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from src.mesh.mesh import Mesh
from src.utils.error_handling import (
    FileOperationError,
    ParseError,
    ensure_directory_exists,
    validate_file_exists,
)

logger = logging.getLogger(__name__)

SUPPORTED_EXTENSIONS = (".obj", ".off")

PathLike = Union[str, Path]


def _parse_float(token: str, path: Path, line_no: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(
            f"{path}:{line_no}: expected a number, got {token!r}",
            {"path": str(path), "line": line_no},
        )


def _parse_int(token: str, path: Path, line_no: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(
            f"{path}:{line_no}: expected an integer, got {token!r}",
            {"path": str(path), "line": line_no},
        )


def _read_obj(path: Path, text: str) -> Tuple[List[List[float]], List[List[int]]]:
    vertices: List[List[float]] = []
    faces: List[List[int]] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        tag = tokens[0]

        if tag == "v":
            if len(tokens) < 4:
                raise ParseError(
                    f"{path}:{line_no}: vertex line needs three coordinates",
                    {"path": str(path), "line": line_no},
                )
            vertices.append([_parse_float(t, path, line_no) for t in tokens[1:4]])
        elif tag == "f":
            refs = tokens[1:]
            if len(refs) != 3:
                raise ParseError(
                    f"{path}:{line_no}: only triangular faces are supported, "
                    f"got {len(refs)} vertices",
                    {"path": str(path), "line": line_no},
                )
            face = []
            for ref in refs:
                # "i", "i/t", "i//n" and "i/t/n" all start with the vertex index
                index = _parse_int(ref.split("/", 1)[0], path, line_no)
                if index < 0:
                    index = len(vertices) + index
                else:
                    index -= 1
                face.append(index)
            faces.append(face)
        # vt, vn, g, o, s, usemtl, mtllib and friends carry nothing we use

    return vertices, faces


def _read_off(path: Path, text: str) -> Tuple[List[List[float]], List[List[int]]]:
    lines = [
        (line_no, raw.split("#", 1)[0].strip())
        for line_no, raw in enumerate(text.splitlines(), start=1)
    ]
    lines = [(line_no, line) for line_no, line in lines if line]
    if not lines or not lines[0][1].startswith("OFF"):
        raise ParseError(f"{path}: missing OFF header", {"path": str(path)})

    # The counts may share the header line ("OFF 8 12 0")
    header_rest = lines[0][1][3:].split()
    cursor = 1
    if header_rest:
        count_line_no, counts = lines[0][0], header_rest
    else:
        if len(lines) < 2:
            raise ParseError(f"{path}: missing OFF counts line", {"path": str(path)})
        count_line_no, counts = lines[1][0], lines[1][1].split()
        cursor = 2
    if len(counts) < 2:
        raise ParseError(
            f"{path}:{count_line_no}: counts line needs vertex and face counts",
            {"path": str(path), "line": count_line_no},
        )
    n_vertices = _parse_int(counts[0], path, count_line_no)
    n_faces = _parse_int(counts[1], path, count_line_no)

    body = lines[cursor:]
    if len(body) < n_vertices + n_faces:
        raise ParseError(
            f"{path}: expected {n_vertices} vertices and {n_faces} faces, "
            f"file ends early",
            {"path": str(path)},
        )

    vertices: List[List[float]] = []
    for line_no, line in body[:n_vertices]:
        tokens = line.split()
        if len(tokens) < 3:
            raise ParseError(
                f"{path}:{line_no}: vertex line needs three coordinates",
                {"path": str(path), "line": line_no},
            )
        vertices.append([_parse_float(t, path, line_no) for t in tokens[:3]])

    faces: List[List[int]] = []
    for line_no, line in body[n_vertices : n_vertices + n_faces]:
        tokens = line.split()
        arity = _parse_int(tokens[0], path, line_no)
        if arity != 3 or len(tokens) < 4:
            raise ParseError(
                f"{path}:{line_no}: only triangular faces are supported, got {arity}",
                {"path": str(path), "line": line_no},
            )
        faces.append([_parse_int(t, path, line_no) for t in tokens[1:4]])

    return vertices, faces


def load_mesh(path: PathLike) -> Mesh:
    """
    Load a triangle mesh from an OBJ or OFF file.

    Vertex and face order are preserved exactly as they appear in the file.

    Args:
        path: Path to a ``.obj`` or ``.off`` file

    Returns:
        Mesh with adjacency available

    Raises:
        FileOperationError: If the file is missing or unreadable
        ParseError: On malformed lines, non-triangular faces or an unknown extension
        MeshIndexError: If a face references a vertex that does not exist
        DegenerateFace: If a face repeats a vertex index
    """
    path = Path(path)
    validate_file_exists(path)
    suffix = path.suffix.lower()
    if suffix not in SUPPORTED_EXTENSIONS:
        raise ParseError(
            f"Unsupported mesh format: {path.suffix or '<none>'}",
            {"path": str(path), "supported": list(SUPPORTED_EXTENSIONS)},
        )

    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise FileOperationError(f"Failed to read mesh: {path}", {"error": str(e)})

    reader = _read_obj if suffix == ".obj" else _read_off
    vertices, faces = reader(path, text)
    mesh = Mesh(vertices, faces, name=path.stem)
    logger.debug(
        "Loaded %s: %d vertices, %d faces", path, mesh.n_vertices, mesh.n_faces
    )
    return mesh


def save_mesh(mesh: Mesh, path: PathLike) -> None:
    """
    Write a mesh as OBJ or OFF, chosen by the file extension.

    Coordinates are written with 17 significant digits so a reload is exact.

    Raises:
        ParseError: On an unknown extension
        FileOperationError: If the file cannot be written
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in SUPPORTED_EXTENSIONS:
        raise ParseError(
            f"Unsupported mesh format: {path.suffix or '<none>'}",
            {"path": str(path), "supported": list(SUPPORTED_EXTENSIONS)},
        )
    if path.parent != Path(""):
        ensure_directory_exists(path.parent)

    lines: List[str] = []
    if suffix == ".obj":
        lines.extend(
            "v {:.17g} {:.17g} {:.17g}".format(*row) for row in mesh.vertices.tolist()
        )
        lines.extend(
            "f {} {} {}".format(*(np.asarray(face) + 1).tolist())
            for face in mesh.faces
        )
    else:
        lines.append("OFF")
        lines.append(f"{mesh.n_vertices} {mesh.n_faces} 0")
        lines.extend(
            "{:.17g} {:.17g} {:.17g}".format(*row) for row in mesh.vertices.tolist()
        )
        lines.extend("3 {} {} {}".format(*face) for face in mesh.faces.tolist())

    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise FileOperationError(f"Failed to write mesh: {path}", {"error": str(e)})
    logger.debug("Saved %s to %s", mesh.name, path)
