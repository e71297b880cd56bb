import { StudyApi } from "./api.js";
import { TrialLoop, preloadImages } from "./controller.js";
import { DomView } from "./view.js";

async function boot(): Promise<void> {
  const api = new StudyApi("");
  const view = new DomView();
  const startBtn = document.getElementById("btn-start") as HTMLButtonElement;
  const participantInput = document.getElementById("participant") as HTMLInputElement;
  const intro = document.getElementById("intro") as HTMLElement;
  const stage = document.getElementById("stage") as HTMLElement;

  startBtn.addEventListener("click", async () => {
    startBtn.disabled = true;
    const sessionId = await api.createSession(participantInput.value);
    intro.hidden = true;
    stage.hidden = false;
    const loop = new TrialLoop(api, sessionId, view, { preload: preloadImages });
    await loop.run();
  });
}

boot();
