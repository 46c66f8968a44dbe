async def fetch_json(client, url, timeout=10):
    response = await client.get(url, timeout=timeout)
    response.raise_for_status()
    return response.json()
