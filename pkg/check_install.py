"""
Smoke check of a nestline installation.
Run this before the first real computation.
"""
from nestline import config
from nestline.circuit import NestClass, generate_surface_code, parse_circuit, serialize_circuit
from nestline.fault_enum import compute_all
from nestline.nest_analysis import code_distance
from nestline.nest_builder import build_nests

try:
    print("Checking nestline installation...")
    print(f"[INFO] Workers: {config.DEFAULT_WORKERS}, log level: {config.LOG_LEVEL}, p_max: {config.DEFAULT_P_MAX}")

    circuit, _ = generate_surface_code(2)
    circuit = parse_circuit(serialize_circuit(circuit))
    print(f"[SUCCESS] Distance-2 surface code: {len(circuit.qubits)} qubits, {circuit.period} steps per round")

    primal, dual = build_nests(circuit, W=8)
    for n in (primal, dual):
        print(f"   - {n.cls.value} nest: {len(n.sticks)} sticks, distance {code_distance(n)}")

    results = compute_all(circuit, classes=list(NestClass), d=2)
    for cls, result in results.items():
        print(f"   - {cls.value} B = {result.B} ({result.B_float:.4g})")

    print("\n[SUCCESS] Everything is working! Try:")
    print("   python -m nestline generate --d 4")
    print("   python -m nestline analytic surface-d4.json")

except Exception as e:
    print(f"\n[ERROR] Check failed: {e}")
    print("\nTroubleshooting:")
    print("1. Install the dependencies with pip install -r requirements.txt")
    print("2. Check the values in your .env file against .env.example")
    print("3. Run from the project root so the nestline package is importable")
