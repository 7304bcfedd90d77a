import { readFileSync } from "node:fs";
import { join } from "node:path";

/** Load a recorded service response from test/fixtures. */
export function fixture<T>(name: string): T {
  const path = join(process.cwd(), "test", "fixtures", `${name}.json`);
  return JSON.parse(readFileSync(path, "utf8")) as T;
}

export function mount(): HTMLElement {
  document.body.innerHTML = "";
  const el = document.createElement("div");
  document.body.appendChild(el);
  return el;
}

/** Resolves after pending microtasks, letting awaited handlers settle. */
export function settle(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
