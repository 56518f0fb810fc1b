# Routers de la CLI: cada módulo expone `commands`
