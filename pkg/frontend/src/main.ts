import { initApp } from "./app.js";

const handle = initApp(document);
handle.refreshChain().catch(() => {
  const notice = document.getElementById("notice");
  if (notice) {
    notice.textContent =
      "node unreachable; check the node URL and that `conflate serve` is running";
    notice.className = "error";
  }
});
