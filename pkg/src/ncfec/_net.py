import logging
import selectors
import socket
import threading
import time

log = logging.getLogger(__name__)

SOCKET_BUFFER = 4 * 1024 * 1024
MAX_DATAGRAM = 65535


def parse_addr(text, default_host="127.0.0.1", default_port=None):
    """'host:port', 'host', ':port' or 'port' -> (host, port)."""
    if isinstance(text, tuple):
        return text
    text = str(text).strip()
    host, sep, port = text.rpartition(":")
    if not sep:
        if text.isdigit():
            return default_host, int(text)
        if default_port is None:
            raise ValueError(f"address {text!r} has no port")
        return text, default_port
    return host or default_host, int(port)


def udp_socket(bind=None):
    s = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    for opt in (socket.SO_RCVBUF, socket.SO_SNDBUF):
        try:
            s.setsockopt(socket.SOL_SOCKET, opt, SOCKET_BUFFER)
        except OSError:
            pass
    if bind is not None:
        s.bind(bind)
    return s


def free_port(host="127.0.0.1"):
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as s:
        s.bind((host, 0))
        return s.getsockname()[1]


class UdpService:
    """Single-socket event loop. Subclasses implement ``handle`` and optionally ``tick``/``drain``."""

    tick_interval = 0.01

    def __init__(self, bind):
        self.sock = udp_socket(bind)
        self.address = self.sock.getsockname()
        self._stop = threading.Event()
        self._thread = None

    def handle(self, data: bytes, addr, now: float):
        raise NotImplementedError

    def tick(self, now: float):
        pass

    def next_deadline(self):
        return None

    def drain(self):
        pass

    def serve(self):
        sel = selectors.DefaultSelector()
        sel.register(self.sock, selectors.EVENT_READ)
        recv = self.sock.recvfrom
        self.sock.setblocking(False)
        try:
            while not self._stop.is_set():
                timeout = self.tick_interval
                deadline = self.next_deadline()
                if deadline is not None:
                    timeout = max(0.0, min(timeout, deadline - time.monotonic()))
                if sel.select(timeout):
                    # empty the socket before yielding back to the selector
                    while True:
                        try:
                            data, addr = recv(MAX_DATAGRAM)
                        except (BlockingIOError, InterruptedError):
                            break
                        self.handle(data, addr, time.monotonic())
                self.tick(time.monotonic())
            self.drain()
        finally:
            sel.close()

    def start(self):
        self._thread = threading.Thread(target=self.serve, name=type(self).__name__, daemon=True)
        self._thread.start()
        return self

    def stop(self, timeout=5.0):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout)
        self.sock.close()
        out = getattr(self, "out", None)
        if out is not None:
            out.close()

    def request_stop(self):
        self._stop.set()
