"""
The field observation loop
==========================

Participants upload observations through the generated apps; curators
review them; accepted and corrected data become the next training set.
This drives the service core directly; `fieldforge serve` exposes the
same operations as the HTTP+JSON API.
"""

from fieldforge.service import MemoryStore, ObservationService
from fieldforge import validate_annotation_set

service = ObservationService(MemoryStore())

# accounts: researchers own projects, participants upload, curators review
service.register_account("email_password", "pi@lab.org", "correct-horse", role="researcher")
researcher = service.issue_token(email="pi@lab.org", credential="correct-horse")["token"]
anonymous = service.register_account("anonymous")
participant = service.issue_token(account_id=anonymous["account_id"])["token"]
service.register_account("email_password", "qa@lab.org", "battery-staple", role="curator")
curator = service.issue_token(email="qa@lab.org", credential="battery-staple")["token"]

project = service.create_project(researcher, "rip watch", ["rip_current", "breaking_wave"])
print("project:", project["name"], project["project_id"][:8])

# a field upload with one on-device detection; retries reuse the receipt
metadata = {
    "media_width": 640,
    "media_height": 480,
    "mode": "ml_assisted",
    "captured_at": "2026-08-09T16:20:00+00:00",
    "geo": {"lat": 36.951, "lon": -122.026},
    "detections": [
        {"x_min": 140, "y_min": 90, "x_max": 420, "y_max": 310, "class_id": 0, "confidence": 0.91}
    ],
}
receipt = service.upload_observation(
    participant, project["project_id"], metadata, b"...video bytes...", idempotency_key="fk-1"
)
retry = service.upload_observation(
    participant, project["project_id"], metadata, b"...video bytes...", idempotency_key="fk-1"
)
print("uploaded:", receipt["observation_id"][:8], "| retry deduplicated:", retry == receipt)

# curation closes the loop with feedback for the participant
service.curate_observation(
    curator,
    receipt["observation_id"],
    "corrected",
    corrected_boxes=[{"x_min": 150, "y_min": 95, "x_max": 410, "y_max": 300, "class_id": 0}],
    feedback_text="Good eye; tightened the box to the visible channel.",
)
print("feedback:", service.get_feedback(participant, receipt["observation_id"])["feedback_text"])

# accepted + corrected observations become the retraining delta
delta = service.export_retraining_set(researcher, project["project_id"])
print("retraining export:", len(delta.images), "image(s), valid:", validate_annotation_set(delta).ok)
(box,) = delta.boxes[receipt["observation_id"]]
print("exported box is the curator's:", (box.x_min, box.y_min, box.x_max, box.y_max))
