import { ApiClient } from "./api.js";
import { App } from "./app.js";

const api = new ApiClient(window.location.origin);
const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");
const app = new App(api, root);
void app.route();
