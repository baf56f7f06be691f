"""Regenerates the sanitized schema fixtures (seeded, no real traffic)."""
import numpy as np

SCHEMAS = {
    "cse_cic_ids_sample.csv": (79, ["BENIGN", "Bot", "DDoS", "Infiltration"]),
    "ciciot2022_sample.csv": (43, ["Benign", "Flood", "Hydra", "Nmap"]),
    "ciciomt2024_sample.csv": (44, ["Benign", "ARP_Spoofing", "DDoS", "Recon"]),
}
DOMAINS = ["day1", "day2", "day3"]
ROWS_PER_DOMAIN = 160

for k, (name, (d, classes)) in enumerate(sorted(SCHEMAS.items())):
    rng = np.random.default_rng(1000 + k)
    centers = rng.normal(0.0, 2.0, size=(len(classes), d))
    scale = np.exp(rng.normal(0.0, 1.0, size=d))
    lines = [",".join([f"f{i + 1}" for i in range(d)] + ["Label", "domain"])]
    for dom_idx, dom in enumerate(DOMAINS):
        shift = rng.normal(0.0, 0.5 * dom_idx, size=d)
        labels = rng.integers(0, len(classes), size=ROWS_PER_DOMAIN)
        for y in labels:
            x = (centers[y] + shift + rng.normal(0.0, 1.0, size=d)) * scale
            lines.append(",".join([f"{v:.6g}" for v in x] + [classes[y], dom]))
    if name.startswith("cse_cic_ids"):
        # real exports carry unparseable rate cells; ingestion must drop these rows
        for row, bad in ((7, "NaN"), (250, "Infinity")):
            cells = lines[row].split(",")
            cells[14] = bad
            lines[row] = ",".join(cells)
    with open(name, "w") as f:
        f.write("\n".join(lines) + "\n")
