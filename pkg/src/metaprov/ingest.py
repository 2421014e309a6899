"""Version discovery and upload ordering.

Reverse Image Search is abstracted behind a provider interface; the one
shipped implementation answers queries from a local corpus file. Membership
("these records are versions of the same image") is the provider's
assertion, exactly as the discovery step is a black box upstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .errors import DiscoveryError, EmptyVersionSetError, RecordValidationError, SidecarSyntaxError
from .model import ImageServiceRecord
from .sidecar import load_corpus

__all__ = [
    "VersionQuery",
    "VersionSet",
    "VersionProvider",
    "LocalCorpusProvider",
    "discover_versions",
    "sort_by_upload",
]


@dataclass(frozen=True)
class VersionQuery:
    image_id: str
    corpus_path: str | Path | None = None


@dataclass(frozen=True)
class VersionSet:
    records: tuple[ImageServiceRecord, ...]
    source: str


class VersionProvider(Protocol):
    """Anything that can enumerate the known versions of an image."""

    name: str

    def find_versions(self, query: VersionQuery) -> list[ImageServiceRecord]: ...


class LocalCorpusProvider:
    """Version discovery from a corpus file on disk.

    The whole corpus is treated as the answer set for any query against it;
    grouping versions into corpora is assumed to have happened upstream.
    """

    name = "local-corpus"

    def __init__(self, corpus_path: str | Path | None = None):
        self.corpus_path = corpus_path

    def find_versions(self, query: VersionQuery) -> list[ImageServiceRecord]:
        path = query.corpus_path or self.corpus_path
        if path is None:
            raise DiscoveryError("no corpus path configured for the local provider")
        path = Path(path)
        if not path.exists():
            raise DiscoveryError(f"corpus file not found: {path}")
        try:
            records, _truth = load_corpus(path)
        except (SidecarSyntaxError, RecordValidationError) as exc:
            raise DiscoveryError(f"corpus file {path} is not usable: {exc}") from exc
        return records


def discover_versions(query: VersionQuery, provider: VersionProvider) -> VersionSet:
    """Collect every version the provider knows for the queried image.

    No deduplication is performed beyond the id-uniqueness invariant; zero
    results raise, because a version tree needs at least one node.
    """
    records = provider.find_versions(query)
    if not records:
        raise EmptyVersionSetError(
            f"provider {provider.name!r} returned no versions for {query.image_id!r}"
        )
    seen: set[str] = set()
    for record in records:
        if record.id in seen:
            raise DiscoveryError(f"duplicate version id {record.id!r} in provider answer set")
        seen.add(record.id)
    return VersionSet(records=tuple(records), source=provider.name)


def sort_by_upload(versions: VersionSet | list[ImageServiceRecord]) -> list[ImageServiceRecord]:
    """Baseline sequence: ascending upload time, ties broken by id.

    Simultaneous uploads are possible, so the lexicographic tie-break keeps
    the ordering deterministic. Idempotent and a permutation of its input.
    """
    records = versions.records if isinstance(versions, VersionSet) else versions
    return sorted(records, key=lambda r: (r.upload_time, r.id))
