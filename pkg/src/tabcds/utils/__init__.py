"""Utility modules shared across tabcds."""

from .notification_manager import NotificationManager, NotificationType, logging_listener
from .file_output import atomic_write_text, read_json, stable_json, write_csv, write_json
from .seeding import derive_seed, substream

__all__ = [
    'NotificationManager', 'NotificationType', 'logging_listener',
    'atomic_write_text', 'read_json', 'stable_json', 'write_csv', 'write_json',
    'derive_seed', 'substream',
]
