import { ApiClient } from "./api.js";
import { AppStore } from "./store.js";
import { mount } from "./ui.js";

const api = new ApiClient("");
const store = new AppStore(api);

// keep the session in the URL so a reload rehydrates the timeline
store.subscribe((state) => {
  if (state.session !== null) {
    const hash = `#session=${state.session.id}`;
    if (location.hash !== hash) {
      history.replaceState(null, "", hash);
    }
  }
});

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app root");
}
mount(root, store);

const fromHash = /^#session=(\w+)$/.exec(location.hash);
void store.loadModels().then(() => {
  if (fromHash) {
    return store.rehydrate(fromHash[1]);
  }
  return undefined;
});
