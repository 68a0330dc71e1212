"""
ASTE-Data-V2 downloader

Fetches the public train/dev/test triplet files for one benchmark over a
shared httpx.AsyncClient, one structured log event per request.
"""

import asyncio
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union, get_args

import httpx

from .errors import FetchError, ValidationError
from .literals import DatasetName, SplitName
from .logging_utils import log_event


logger = logging.getLogger(__name__)

BASE_URL = "https://raw.githubusercontent.com/xuuuluuu/SemEval-Triplet-data/master/ASTE-Data-V2-EMNLP2020"
SPLITS = get_args(SplitName)
DATASETS = get_args(DatasetName)
TIMEOUT = 30.0


@dataclass(frozen=True)
class DatasetFiles:
    train: Path
    dev: Path
    test: Path

    def to_json(self) -> Dict[str, str]:
        return {"train": str(self.train), "dev": str(self.dev), "test": str(self.test)}


def log_fetch(url: str, status: int, duration_ms: float, error: Optional[str] = None) -> None:
    log_event(
        logger,
        "fetch",
        logging.WARNING if error else logging.INFO,
        url=url,
        status=status,
        duration_ms=duration_ms,
        error=error,
    )


class DatasetFetcher:
    """Downloads benchmark files with a caller-supplied or owned AsyncClient"""

    def __init__(self, client: Optional[httpx.AsyncClient] = None, base_url: str = BASE_URL):
        self.base_url = base_url.rstrip("/")
        self._owns_client = client is None
        self.client = client or httpx.AsyncClient()

    def url_for(self, name: DatasetName, split: SplitName) -> str:
        return f"{self.base_url}/{name}/{split}_triplets.txt"

    async def _download(self, url: str) -> bytes:
        """
        GET one file

        Raises:
            FetchError: HTTP status >= 400 (with the status) or a transport failure (status 0)
        """
        started = time.perf_counter()
        try:
            response = await self.client.get(url, timeout=TIMEOUT, follow_redirects=True)
            duration_ms = (time.perf_counter() - started) * 1000
            log_fetch(url, response.status_code, duration_ms)
            response.raise_for_status()
            return response.content
        except httpx.HTTPStatusError as e:
            duration_ms = (time.perf_counter() - started) * 1000
            error_msg = f"HTTP {e.response.status_code}: {e.response.text[:200]}"
            log_fetch(url, e.response.status_code, duration_ms, error_msg)
            raise FetchError(error_msg, status_code=e.response.status_code, url=url) from e
        except httpx.HTTPError as e:
            duration_ms = (time.perf_counter() - started) * 1000
            error_msg = f"Request failed: {e}"
            log_fetch(url, 0, duration_ms, error_msg)
            raise FetchError(error_msg, status_code=0, url=url) from e

    async def _fetch_split(self, name: DatasetName, split: SplitName, target: Path, overwrite: bool) -> Path:
        if target.exists() and not overwrite:
            log_event(logger, "fetch_skipped", path=str(target))
            return target
        content = await self._download(self.url_for(name, split))
        partial = target.with_suffix(target.suffix + ".part")
        partial.write_bytes(content)
        partial.replace(target)
        return target

    async def fetch(self, name: DatasetName, dest_dir: Union[str, Path], overwrite: bool = False) -> DatasetFiles:
        if name not in DATASETS:
            raise ValidationError(f"unknown dataset {name!r}; choose from {list(DATASETS)}")
        folder = Path(dest_dir) / name
        folder.mkdir(parents=True, exist_ok=True)
        paths = await asyncio.gather(*(
            self._fetch_split(name, split, folder / f"{split}_triplets.txt", overwrite) for split in SPLITS
        ))
        return DatasetFiles(*paths)

    async def close(self) -> None:
        if self._owns_client:
            await self.client.aclose()

    async def __aenter__(self) -> "DatasetFetcher":
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb) -> None:
        await self.close()


async def fetch_dataset(
    name: DatasetName,
    dest_dir: Union[str, Path],
    client: Optional[httpx.AsyncClient] = None,
    overwrite: bool = False,
) -> DatasetFiles:
    """Download ``<dest_dir>/<name>/{train,dev,test}_triplets.txt``; existing files are kept unless ``overwrite``."""
    async with DatasetFetcher(client) as fetcher:
        return await fetcher.fetch(name, dest_dir, overwrite)
