// Page bootstrap: the service base URL is the single configuration knob
// (data-base-url on the mount node); session and annotator identity come
// from the query string or the connect form.

import { createApp } from './app.js';

function boot(): void {
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app mount node');
  const baseUrl = root.dataset.baseUrl || window.location.origin;

  const params = new URLSearchParams(window.location.search);
  const sessionId = params.get('session');
  const annotatorId = params.get('annotator');
  if (sessionId && annotatorId) {
    void createApp(root, { baseUrl, sessionId, annotatorId }).start();
    return;
  }

  root.innerHTML = `<form id="connect">
    <h2>connect to a session</h2>
    <label>session id <input name="session" required></label>
    <label>annotator id <input name="annotator" required></label>
    <button type="submit">start</button>
  </form>`;
  const form = document.getElementById('connect') as HTMLFormElement;
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    const data = new FormData(form);
    void createApp(root, {
      baseUrl,
      sessionId: String(data.get('session')),
      annotatorId: String(data.get('annotator')),
    }).start();
  });
}

boot();
