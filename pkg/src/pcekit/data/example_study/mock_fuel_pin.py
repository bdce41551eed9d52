"""Mock fuel-pin simulator standing in for a real fuel performance code.

NOT a physics model. It reads ``name = value`` lines from the input file,
evaluates smooth closed-form responses of the four inputs on a fixed
29-step time grid, writes ``output.csv`` and prints the peak centreline
temperature. Standard library only, so each run starts fast.

Usage: python mock_fuel_pin.py INPUT_FILE
"""

import math
import sys

# nominal values used to standardize the inputs
NOMINAL = {
    "fuel_thermal_conductivity": (2.8, 0.1),
    "fuel_density": (10430.0, 521.5),
    "clad_thermal_conductivity": (75.0, 3.8),
    "clad_density": (2650.0, 132.5),
}
END_TIME = 3.1536e7
STEPS = 29
AMBIENT = 293.15


def time_grid():
    """t = 0 followed by 28 log-spaced times from 1e2 s to one year."""
    lo, hi = math.log10(1e2), math.log10(END_TIME)
    return [0.0] + [10.0 ** (lo + (hi - lo) * i / (STEPS - 2)) for i in range(STEPS - 1)]


def responses(fuel_thermal_conductivity, fuel_density, clad_thermal_conductivity, clad_density):
    """Per-step outputs as three lists aligned with ``time_grid()``."""
    z1 = (fuel_thermal_conductivity - NOMINAL["fuel_thermal_conductivity"][0]) / NOMINAL["fuel_thermal_conductivity"][1]
    z2 = (fuel_density - NOMINAL["fuel_density"][0]) / NOMINAL["fuel_density"][1]
    z3 = (clad_thermal_conductivity - NOMINAL["clad_thermal_conductivity"][0]) / NOMINAL["clad_thermal_conductivity"][1]
    z4 = (clad_density - NOMINAL["clad_density"][0]) / NOMINAL["clad_density"][1]

    clad, fuel, gas = [], [], []
    for t in time_grid():
        ramp = 1.0 - math.exp(-t / 5e3)
        drift = 1.0 + 0.01 * math.sin(t / 2e6)
        clad.append(AMBIENT + ramp * drift * (300.0 + 12.0 * z2 + 4.0 * z1 + 2.5 * z3 + 0.5 * z4 + 1.5 * z1 * z2))
        fuel.append(AMBIENT + ramp * drift * 1100.0 * math.exp(0.03 * z2 - 0.02 * z1 + 0.002 * z4 + 0.0005 * z3))
        if t < 1e6:
            gas.append(0.0)
        else:
            growth = math.log(t / 1e6) ** 2
            gas.append(1e-4 * growth * math.exp(0.2 * z2 + 0.18 * z3 + 0.05 * z1 + 0.01 * z4))
    return clad, fuel, gas


def read_input(path):
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                key, _, val = line.partition("=")
                values[key.strip()] = float(val)
    return values


def main(argv):
    values = read_input(argv[1])
    clad, fuel, gas = responses(**{k: values[k] for k in NOMINAL})
    with open("output.csv", "w") as fh:
        fh.write("time,clad_surface_temperature,fuel_centerline_temperature,fission_gas_production\n")
        for row in zip(time_grid(), clad, fuel, gas):
            fh.write(",".join(repr(v) for v in row) + "\n")
    print(f"peak fuel centerline temperature = {max(fuel)!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
