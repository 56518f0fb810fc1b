# Servicios numéricos
