"""Query a generation service over the wire protocol.

The remote backend POSTs {"inputs": [...], "num_beams": n,
"max_new_tokens": m} to /v1/generate and pairs the positional outputs
back to requests. This demo starts the sidecar service in echo mode
(deterministic, no model weights) inside the process, checks protocol
conformance, and runs a batch through it. Install the sidecar first:

    pip install -e ./service
"""

import threading
import time

try:
    import uvicorn
    from genservice import EchoGenerator, ServiceConfig, create_app
except ImportError:
    raise SystemExit("this demo needs the sidecar: pip install -e ./service")

from clinevent import GenRequest, RemoteBackend, verify_protocol

app = create_app(ServiceConfig(model="echo"), generator=EchoGenerator())
config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
server = uvicorn.Server(config)
threading.Thread(target=server.run, daemon=True).start()
while not server.started:
    time.sleep(0.05)
url = f"http://127.0.0.1:{server.servers[0].sockets[0].getsockname()[1]}"
print(f"echo service listening at {url}")

verify_protocol(url)
print("wire-protocol conformance: OK")

backend = RemoteBackend(url, batch_size=2)
requests = [
    GenRequest("Event type is Sign_symptom.", request_id="q1"),
    GenRequest("Event type is Medication.", request_id="q2"),
    GenRequest("Mentions are requested.", num_beams=4, request_id="q3"),
]
for request_id, output in backend.generate(requests):
    print(f"  {request_id}: {output!r}")

server.should_exit = True
