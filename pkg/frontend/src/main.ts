import { StudioApp } from "./ui";
import "./style.css";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
new StudioApp(root).mount();
