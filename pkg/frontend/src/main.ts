// Entry point: wire URL parameters to a session client, keyboard input
// and the two-panel display. Expected parameters: ?server=host:port,
// session=<id>, role=alice|bob|spectator.

import { SessionClient } from "./client.js";
import { ChoiceInput } from "./input.js";
import { Role } from "./protocol.js";
import { applyToDom } from "./render.js";

function websocketUrl(server: string, sessionId: string): string {
    const base = server.includes("://") ? server : `ws://${server}`;
    return `${base.replace(/^http/, "ws").replace(/\/$/, "")}/sessions/${sessionId}/ws`;
}

function main(): void {
    const params = new URLSearchParams(window.location.search);
    const server = params.get("server") ?? window.location.host;
    const sessionId = params.get("session") ?? "";
    const roleParam = params.get("role") ?? "spectator";
    const role = (["alice", "bob"].includes(roleParam) ? roleParam : "spectator") as
        | Role
        | "spectator";

    if (!sessionId) {
        document.body.innerHTML =
            "<p>missing ?session=… parameter; create one via POST /sessions first</p>";
        return;
    }

    const demo = params.get("demo") === "1";
    const client = new SessionClient({
        role,
        socketFactory: () => new WebSocket(websocketUrl(server, sessionId)) as never,
    });
    const input = new ChoiceInput();

    client.onUpdate = (state) => applyToDom(state, document, performance.now(), { demo });
    setInterval(() => applyToDom(client.state, document, performance.now(), { demo }), 500);

    document.addEventListener("keydown", (event) => {
        if (role === "spectator") return; // read-only
        const choice = input.handleKey(event.key);
        if (choice !== null) {
            client.submitChoice(choice.setting, choice.choiceId);
        }
    });

    client.connect();
}

main();
