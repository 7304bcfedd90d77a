// Browser entry point: same-origin API, no token (the serve command adds
// one only for remote deployments, where a reverse proxy injects it).

import { TrialApi } from "./api.js";
import { Dashboard } from "./app.js";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");
new Dashboard(root, new TrialApi("")).mount();
