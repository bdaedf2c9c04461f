"""Reader for SDPA sparse (.dat-s) files.

Only the interchange file is consumed; nothing is imported from the tool
that produced it.  The equality-constrained feasibility reading is used:
find a PSD block-diagonal Y with tr(F_i Y) = c_i for every constraint row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class SdpaProblem:
    """Parsed constraint data: m rows over block-diagonal symmetric matrices."""

    m: int
    block_sizes: list[int]
    c: list[float]
    # entries[i] lists (block, row, col, value) with row <= col, 0-based
    entries: list[list[tuple[int, int, int, float]]] = field(default_factory=list)
    objective: list[tuple[int, int, int, float]] = field(default_factory=list)
    path: str = ""

    @property
    def n_total(self) -> int:
        return sum(abs(b) for b in self.block_sizes)


def parse_sdpa_file(path: str | Path) -> SdpaProblem:
    path = Path(path)
    lines = []
    for raw in path.read_text().splitlines():
        stripped = raw.strip()
        if not stripped or stripped[0] in "*\"":
            continue
        lines.append(stripped)
    if len(lines) < 4:
        raise ValueError(f"{path}: truncated SDPA file")
    m = int(lines[0].split()[0])
    n_blocks = int(lines[1].split()[0])
    block_sizes = [int(tok.strip("{}(),")) for tok in lines[2].replace(",", " ").split()]
    if len(block_sizes) != n_blocks:
        raise ValueError(f"{path}: block count mismatch")
    c = [float(tok) for tok in lines[3].replace(",", " ").split()]
    if len(c) != m:
        raise ValueError(f"{path}: constraint vector length mismatch")

    entries: list[list[tuple[int, int, int, float]]] = [[] for _ in range(m)]
    objective: list[tuple[int, int, int, float]] = []
    for line in lines[4:]:
        parts = line.split()
        matno, block, i, j, value = int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4])
        if not 0 <= matno <= m:
            raise ValueError(f"{path}: matrix index {matno} out of range")
        if not 1 <= block <= n_blocks:
            raise ValueError(f"{path}: block index {block} out of range")
        r, col = i - 1, j - 1
        if r > col:
            r, col = col, r
        record = (block - 1, r, col, value)
        if matno == 0:
            objective.append(record)
        else:
            entries[matno - 1].append(record)
    return SdpaProblem(m=m, block_sizes=block_sizes, c=c, entries=entries, objective=objective, path=str(path))
