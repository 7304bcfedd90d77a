// Shared formatting so tests can assert DOM text equals the formatted
// server value, byte for byte.

export function fmtProb(x: number): string {
  return x.toFixed(3);
}

export function fmtInterval(lo: number, hi: number): string {
  return `[${fmtProb(lo)}, ${fmtProb(hi)}]`;
}

export function fmtDose(dose: [number, number] | number[]): string {
  return `(${dose[0]}, ${dose[1]})`;
}

export function fmtPercent(x: number): string {
  return `${(100 * x).toFixed(1)}%`;
}
