import { ApiClient } from "./api.js";
import { mountViewer } from "./app.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
mountViewer(root, new ApiClient(fetch.bind(globalThis)), window);
