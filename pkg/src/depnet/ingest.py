"""Loading, filtering, and validation of package release metadata.

The input is three CSV files (packages, releases, dependency declarations)
in the style of registry metadata dumps. Parsing is strict about internal
consistency: every release must belong to a known package and every
dependency row must refer to an existing source release. Dependency rows
whose *target* is unknown are kept at parse time and removed by
:func:`filter_dependencies`, which mirrors how real dumps contain
references to packages hosted outside the registry.
"""

from __future__ import annotations

import csv
import statistics
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional

from .timeutil import Month, iter_months, month_of, parse_timestamp

# Dependency kinds that denote install/run-time requirements. Everything
# else (dev, test, build, optional, ...) is excluded by default.
DEFAULT_INCLUDED_KINDS = frozenset({"runtime", "imports", "depends", "normal"})

# Kinds commonly seen in registry dumps; anything else is "unknown" but
# still carried through parsing (the include-list decides what survives).
KNOWN_KINDS = DEFAULT_INCLUDED_KINDS | frozenset(
    {
        "development",
        "optional",
        "enhances",
        "suggests",
        "build",
        "configure",
        "test",
        "develop",
        "dev",
    }
)


class DatasetError(ValueError):
    """Raised for malformed or internally inconsistent input data."""


def version_sort_key(version: str) -> tuple:
    """Ordering key for version strings.

    Dot-separated segments compare numerically when both sides are digits,
    lexicographically otherwise; numeric segments sort before non-numeric.
    """
    parts = []
    for seg in version.split("."):
        if seg.isdigit():
            parts.append((0, int(seg), ""))
        else:
            parts.append((1, 0, seg))
    return tuple(parts)


@dataclass(frozen=True, slots=True)
class PackageRecord:
    name: str
    ecosystem: str


@dataclass(frozen=True, slots=True)
class ReleaseRecord:
    package: str
    version: str
    timestamp: datetime


@dataclass(frozen=True, slots=True)
class DependencyRecord:
    source_package: str
    source_version: str
    target_package: str
    constraint: str
    kind: str

    @property
    def kind_is_known(self) -> bool:
        return self.kind in KNOWN_KINDS


@dataclass(slots=True)
class FilterReport:
    """Counts of records dropped by each filtering rule."""

    kind_dropped: int = 0
    excluded_packages_dropped: int = 0
    excluded_releases_dropped: int = 0
    excluded_deps_dropped: int = 0
    unresolved_deps_dropped: int = 0
    unresolved_fraction: float = 0.0
    duplicate_deps_dropped: int = 0

    def total_deps_dropped(self) -> int:
        return (
            self.kind_dropped
            + self.excluded_deps_dropped
            + self.unresolved_deps_dropped
            + self.duplicate_deps_dropped
        )


class _DatasetIndex:
    """Derived lookup structures for a Dataset, built once and shared.

    All containers are populated in a deterministic order that depends only
    on record order in the Dataset, never on string hashing.
    """

    def __init__(self, dataset: "Dataset"):
        self.package_names = {p.name for p in dataset.packages}
        by_package: dict[str, list[ReleaseRecord]] = {}
        for rel in dataset.releases:
            by_package.setdefault(rel.package, []).append(rel)
        for rels in by_package.values():
            rels.sort(key=lambda r: (r.timestamp, version_sort_key(r.version)))
        self.releases_by_package = by_package
        # Parallel timestamp arrays for bisect-based latest-release lookup.
        self.release_times = {p: [r.timestamp for r in rels] for p, rels in by_package.items()}
        self.first_release = {p: rels[0] for p, rels in by_package.items()}

        deps: dict[tuple[str, str], list[str]] = {}
        for dep in dataset.dependencies:
            deps.setdefault((dep.source_package, dep.source_version), []).append(
                dep.target_package
            )
        self.targets_by_release = deps

        # All updates (non-first releases), time-ordered, for window queries.
        updates: list[tuple[datetime, str]] = []
        for pkg, rels in by_package.items():
            for rel in rels[1:]:
                updates.append((rel.timestamp, pkg))
        updates.sort(key=lambda item: (item[0], item[1]))
        self.updates_sorted = updates
        self.update_times = [ts for ts, _ in updates]

    def latest_at(self, package: str, t: datetime) -> Optional[ReleaseRecord]:
        times = self.release_times.get(package)
        if not times:
            return None
        pos = bisect_right(times, t)
        if pos == 0:
            return None
        return self.releases_by_package[package][pos - 1]

    def updates_in_window(self, start: datetime, end: datetime) -> list[tuple[datetime, str]]:
        """Updates with timestamp in the half-open interval (start, end]."""
        lo = bisect_right(self.update_times, start)
        hi = bisect_right(self.update_times, end)
        return self.updates_sorted[lo:hi]


@dataclass
class Dataset:
    """A validated collection of packages, releases, and dependencies.

    Immutable by convention after construction; the lazy index makes
    concurrent read access safe (rebuilding it is idempotent).
    """

    packages: set[PackageRecord]
    releases: list[ReleaseRecord]
    dependencies: list[DependencyRecord]
    cutoff: datetime
    ecosystem: str = "default"
    filter_report: FilterReport = field(default_factory=FilterReport, compare=False)
    _index: Optional[_DatasetIndex] = field(
        default=None, repr=False, compare=False, init=False
    )

    def index(self) -> _DatasetIndex:
        idx = self._index
        if idx is None:
            idx = _DatasetIndex(self)
            self._index = idx
        return idx

    @property
    def package_names(self) -> set[str]:
        return {p.name for p in self.packages}


def _open_csv(path: Path, required: list[str]):
    try:
        handle = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise DatasetError(f"{path}: file not found") from None
    reader = csv.DictReader(handle)
    header = reader.fieldnames
    if header is None:
        handle.close()
        raise DatasetError(f"{path}: missing header row")
    missing = [col for col in required if col not in header]
    if missing:
        handle.close()
        raise DatasetError(f"{path}: missing column(s) {', '.join(missing)}")
    return handle, reader


def _cell(row: dict, path: Path, line: int, column: str) -> str:
    value = row.get(column)
    if value is None:
        raise DatasetError(f"{path}, line {line}: missing value in column '{column}'")
    return value.strip()


def parse_dataset(
    packages_path, releases_path, dependencies_path,
    cutoff: Optional[datetime],
    ecosystem: str = "default",
) -> Dataset:
    """Load the three CSV files into an unfiltered Dataset.

    ``cutoff`` marks the end of the observation window (the censoring
    boundary) and must be at or after the last release; pass ``None`` to
    use the maximum release timestamp. No filtering is applied here; the
    filter report starts at all zeros.
    """
    packages_path = Path(packages_path)
    releases_path = Path(releases_path)
    dependencies_path = Path(dependencies_path)

    packages: set[PackageRecord] = set()
    package_lines: dict[str, int] = {}
    handle, reader = _open_csv(packages_path, ["name"])
    with handle:
        for line, row in enumerate(reader, start=2):
            name = _cell(row, packages_path, line, "name")
            if not name:
                raise DatasetError(
                    f"{packages_path}, line {line}: empty value in column 'name'"
                )
            if name in package_lines:
                raise DatasetError(
                    f"{packages_path}: duplicate package '{name}' "
                    f"(lines {package_lines[name]} and {line})"
                )
            package_lines[name] = line
            packages.add(PackageRecord(name=name, ecosystem=ecosystem))

    releases: list[ReleaseRecord] = []
    release_lines: dict[tuple[str, str], int] = {}
    max_ts: Optional[datetime] = None
    handle, reader = _open_csv(releases_path, ["package", "version", "timestamp"])
    with handle:
        for line, row in enumerate(reader, start=2):
            pkg = _cell(row, releases_path, line, "package")
            version = _cell(row, releases_path, line, "version")
            raw_ts = _cell(row, releases_path, line, "timestamp")
            if pkg not in package_lines:
                raise DatasetError(
                    f"{releases_path}, line {line}: release of unknown package '{pkg}'"
                )
            if not version:
                raise DatasetError(
                    f"{releases_path}, line {line}: empty value in column 'version'"
                )
            try:
                ts = parse_timestamp(raw_ts)
            except ValueError:
                raise DatasetError(
                    f"{releases_path}, line {line}: column 'timestamp' "
                    f"has unparseable value {raw_ts!r}"
                ) from None
            key = (pkg, version)
            if key in release_lines:
                raise DatasetError(
                    f"{releases_path}: duplicate release {pkg} {version} "
                    f"(lines {release_lines[key]} and {line})"
                )
            release_lines[key] = line
            releases.append(ReleaseRecord(package=pkg, version=version, timestamp=ts))
            if max_ts is None or ts > max_ts:
                max_ts = ts

    if cutoff is None:
        if max_ts is None:
            raise DatasetError(f"{releases_path}: empty dataset requires an explicit cutoff")
        cutoff = max_ts
    elif max_ts is not None and max_ts > cutoff:
        raise DatasetError(
            f"{releases_path}: release timestamp {max_ts.isoformat()} "
            f"is after the cutoff {cutoff.isoformat()}"
        )

    dependencies: list[DependencyRecord] = []
    handle, reader = _open_csv(
        dependencies_path,
        ["source_package", "source_version", "target_package", "constraint", "kind"],
    )
    with handle:
        for line, row in enumerate(reader, start=2):
            src = _cell(row, dependencies_path, line, "source_package")
            src_ver = _cell(row, dependencies_path, line, "source_version")
            target = _cell(row, dependencies_path, line, "target_package")
            constraint = _cell(row, dependencies_path, line, "constraint")
            kind = _cell(row, dependencies_path, line, "kind").lower()
            if (src, src_ver) not in release_lines:
                raise DatasetError(
                    f"{dependencies_path}, line {line}: dependency of unknown "
                    f"release {src} {src_ver}"
                )
            if not target:
                raise DatasetError(
                    f"{dependencies_path}, line {line}: empty value in column 'target_package'"
                )
            dependencies.append(
                DependencyRecord(
                    source_package=src,
                    source_version=src_ver,
                    target_package=target,
                    constraint=constraint,
                    kind=kind,
                )
            )

    return Dataset(
        packages=packages,
        releases=releases,
        dependencies=dependencies,
        cutoff=cutoff,
        ecosystem=ecosystem,
    )


def load_dataset_dir(
    directory, cutoff: Optional[datetime] = None, ecosystem: Optional[str] = None
) -> Dataset:
    """Parse ``packages.csv``, ``releases.csv``, ``dependencies.csv`` from a directory."""
    directory = Path(directory)
    if ecosystem is None:
        ecosystem = directory.name or "default"
    return parse_dataset(
        directory / "packages.csv",
        directory / "releases.csv",
        directory / "dependencies.csv",
        cutoff,
        ecosystem=ecosystem,
    )


def load_exclusions(path) -> set[str]:
    """Read an exclusion list: one package name per line, blanks ignored."""
    names = set()
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            name = line.strip()
            if name:
                names.add(name)
    return names


def filter_dependencies(
    d: Dataset,
    included_kinds: Iterable[str] = DEFAULT_INCLUDED_KINDS,
    excluded_packages: Iterable[str] = (),
) -> Dataset:
    """Apply the dependency-kind, noise-package, and resolvability filters.

    Three removal rules, applied in order:

    1. dependency rows whose kind is not in ``included_kinds``;
    2. all releases and dependency rows of ``excluded_packages`` (the
       package records themselves are removed too);
    3. dependency rows whose target package does not exist in the dataset,
       also reported as a fraction of the pre-filter dependency rows.

    Duplicate rows for the same (source release, target, kind) are then
    collapsed, first occurrence winning. Filtering is total and idempotent.
    """
    include = {k.strip().lower() for k in included_kinds}
    excluded = set(excluded_packages)
    report = FilterReport()
    pre_dep_count = len(d.dependencies)

    deps = []
    for dep in d.dependencies:
        if dep.kind not in include:
            report.kind_dropped += 1
        else:
            deps.append(dep)

    packages = {p for p in d.packages if p.name not in excluded}
    report.excluded_packages_dropped = len(d.packages) - len(packages)
    releases = [r for r in d.releases if r.package not in excluded]
    report.excluded_releases_dropped = len(d.releases) - len(releases)
    kept = [dep for dep in deps if dep.source_package not in excluded]
    report.excluded_deps_dropped = len(deps) - len(kept)
    deps = kept

    names = {p.name for p in packages}
    kept = [dep for dep in deps if dep.target_package in names]
    report.unresolved_deps_dropped = len(deps) - len(kept)
    report.unresolved_fraction = (
        report.unresolved_deps_dropped / pre_dep_count if pre_dep_count else 0.0
    )
    deps = kept

    seen: set[tuple[str, str, str, str]] = set()
    unique: list[DependencyRecord] = []
    for dep in deps:
        key = (dep.source_package, dep.source_version, dep.target_package, dep.kind)
        if key in seen:
            report.duplicate_deps_dropped += 1
        else:
            seen.add(key)
            unique.append(dep)

    return Dataset(
        packages=packages,
        releases=releases,
        dependencies=unique,
        cutoff=d.cutoff,
        ecosystem=d.ecosystem,
        filter_report=report,
    )


@dataclass(frozen=True, slots=True)
class BurstWarning:
    month: Month
    count: int
    trailing_median: float


@dataclass
class ValidationReport:
    """Report-only anomaly scan; nothing is repaired or reordered."""

    duplicate_releases: list[tuple[str, str]] = field(default_factory=list)
    ordering_flags: list[str] = field(default_factory=list)
    burst_warnings: list[BurstWarning] = field(default_factory=list)

    @property
    def is_clean(self) -> bool:
        return not (self.duplicate_releases or self.ordering_flags or self.burst_warnings)


def validate_dataset(d: Dataset, burst_factor: float = 10.0) -> ValidationReport:
    """Scan for duplicate releases, version/time ordering conflicts, and
    months whose release count exceeds ``burst_factor`` times the trailing
    12-month median (a fingerprint of bulk imports with bogus timestamps).

    Burst detection needs a full 12 months of history with a non-zero
    median, so early months and all-quiet histories are never flagged.
    """
    report = ValidationReport()

    seen: set[tuple[str, str]] = set()
    by_package: dict[str, list[ReleaseRecord]] = {}
    for rel in d.releases:
        key = (rel.package, rel.version)
        if key in seen:
            report.duplicate_releases.append(key)
        seen.add(key)
        by_package.setdefault(rel.package, []).append(rel)

    for pkg in sorted(by_package):
        rels = sorted(by_package[pkg], key=lambda r: version_sort_key(r.version))
        times = [r.timestamp for r in rels]
        if any(b <= a for a, b in zip(times, times[1:])):
            report.ordering_flags.append(pkg)

    if d.releases:
        counts: dict[Month, int] = {}
        for rel in d.releases:
            m = month_of(rel.timestamp)
            counts[m] = counts.get(m, 0) + 1
        first = min(counts)
        last = max(counts)
        months = list(iter_months(first, last))
        series = [counts.get(m, 0) for m in months]
        for i in range(12, len(series)):
            med = statistics.median(series[i - 12 : i])
            if med > 0 and series[i] > burst_factor * med:
                report.burst_warnings.append(
                    BurstWarning(month=months[i], count=series[i], trailing_median=med)
                )

    return report
