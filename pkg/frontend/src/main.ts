// Browser entry point. The service origin defaults to wherever the page is
// hosted; ?api=<url> overrides it for local development.

import { HttpExperimentApi } from "./api.js";
import { ExpUiApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? window.location.origin;

const root = document.getElementById("app") ?? document.body;
const app = new ExpUiApp(new HttpExperimentApi(base), root as HTMLElement, {
  storage: window.sessionStorage,
});

void app.start();
