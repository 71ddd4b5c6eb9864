import logging
from enum import Enum
from typing import Callable, List

logger = logging.getLogger(__name__)


class NotificationType(Enum):
    """Severity of a training or harness notification."""
    OK = 1  # Round finished, artifact written
    WARNING = 2  # Clamped KL, clipped temperature, skipped check
    CRITICAL = 3  # Divergence or aborted run


class NotificationManager:
    """
    Dispatches run notifications to registered listeners.

    Learners and commands call ``notify``; whoever drives them (the CLI,
    a notebook, a test) decides where the messages go.
    """
    _listeners: List[Callable[[str, NotificationType], None]] = []

    @classmethod
    def addListener(cls, callback: Callable[[str, NotificationType], None]) -> None:
        """
        Register a listener to receive notifications.

        Args:
            callback: Function called with the message and its type
        """
        if callback not in cls._listeners:
            cls._listeners.append(callback)

    @classmethod
    def removeListener(cls, callback: Callable[[str, NotificationType], None]) -> None:
        if callback in cls._listeners:
            cls._listeners.remove(callback)

    @classmethod
    def clearListeners(cls) -> None:
        cls._listeners.clear()

    @classmethod
    def notify(cls, message: str, type_: NotificationType) -> None:
        """
        Send a notification to all registered listeners.

        Args:
            message: The notification message
            type_: The notification type (OK, WARNING, CRITICAL)
        """
        for callback in list(cls._listeners):
            callback(message, type_)


_LEVELS = {
    NotificationType.OK: logging.INFO,
    NotificationType.WARNING: logging.WARNING,
    NotificationType.CRITICAL: logging.ERROR,
}


def logging_listener(message: str, type_: NotificationType) -> None:
    """Forward a notification to the ``tabcds`` logger at the matching level."""
    logger.log(_LEVELS[type_], message)


__all__ = ['NotificationManager', 'NotificationType', 'logging_listener']
