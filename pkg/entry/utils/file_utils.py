"""
File system utilities; every report file is written atomically.
"""
import os
import tempfile


def ensure_directory_exists(directory_path: str) -> bool:
    """
    Ensure directory exists, create if it doesn't.

    Args:
        directory_path: Path to directory

    Returns:
        True if directory exists or was created successfully
    """
    try:
        os.makedirs(directory_path, exist_ok=True)
        return True
    except Exception:
        return False


def atomic_write_bytes(file_path: str, content: bytes) -> str:
    """
    Write bytes through a temporary file in the target directory, then rename.

    Args:
        file_path: Destination path
        content: Bytes to write

    Returns:
        The destination path
    """
    directory = os.path.dirname(os.path.abspath(file_path))
    ensure_directory_exists(directory)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(content)
        os.replace(tmp, file_path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return file_path


def atomic_write_text(file_path: str, content: str, encoding: str = "utf-8") -> str:
    return atomic_write_bytes(file_path, content.encode(encoding))
