export const SERVICE_PORT = 8799;
export const BASE_URL = `http://127.0.0.1:${SERVICE_PORT}`;
